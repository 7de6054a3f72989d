#include "attacksim/signatures.hpp"

#include "attacksim/error.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace attacksim {

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

} // namespace

void SignatureDb::add(SignatureRule rule) {
    double mass = 0;
    for (const auto& h : rule.hypotheses) {
        if (!(h.probability >= 0 && h.probability <= 1))
            throw Error(ErrorCode::Validation, "signature probability outside [0,1] for '" + rule.pattern + "'");
        mass += h.probability;
    }
    if (mass > 1 + 1e-9) throw Error(ErrorCode::Validation, "signature probabilities exceed 1 for '" + rule.pattern + "'");
    rules_.push_back(std::move(rule));
}

SignatureDb SignatureDb::parse(std::string_view text) {
    SignatureDb db;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto content = trim(line);
        if (content.empty() || content[0] == '#') continue;
        auto arrow = content.find("=>");
        if (arrow == std::string::npos) throw ParseError("expected 'pattern => os:p, ...'", line_no, 1);
        SignatureRule rule;
        rule.pattern = trim(std::string_view(content).substr(0, arrow));
        if (rule.pattern.empty()) throw ParseError("empty banner pattern", line_no, 1);
        std::istringstream list(content.substr(arrow + 2));
        std::string item;
        while (std::getline(list, item, ',')) {
            auto entry = trim(item);
            auto colon = entry.rfind(':');
            if (colon == std::string::npos) throw ParseError("expected os:probability, got '" + entry + "'", line_no, 1);
            OsHypothesis h;
            auto os = trim(std::string_view(entry).substr(0, colon));
            auto slash = os.find('/');
            h.os = os.substr(0, slash);
            if (slash != std::string::npos) h.version = os.substr(slash + 1);
            auto number = trim(std::string_view(entry).substr(colon + 1));
            auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), h.probability);
            if (h.os.empty() || ec != std::errc() || ptr != number.data() + number.size() || !std::isfinite(h.probability))
                throw ParseError("bad hypothesis '" + entry + "'", line_no, 1);
            rule.hypotheses.push_back(std::move(h));
        }
        if (rule.hypotheses.empty()) throw ParseError("rule without hypotheses", line_no, 1);
        try {
            db.add(std::move(rule));
        } catch (const Error& e) {
            throw ParseError(e.what(), line_no, 1);
        }
    }
    return db;
}

const SignatureRule* SignatureDb::match(std::string_view banner) const {
    for (const auto& rule : rules_)
        if (banner.find(rule.pattern) != std::string_view::npos) return &rule;
    return nullptr;
}

std::string SignatureDb::to_text() const {
    std::ostringstream out;
    out.precision(17);
    for (const auto& rule : rules_) {
        out << rule.pattern << " =>";
        bool first = true;
        for (const auto& h : rule.hypotheses) {
            out << (first ? " " : ", ") << h.os;
            if (!h.version.empty()) out << '/' << h.version;
            out << ':' << h.probability;
            first = false;
        }
        out << '\n';
    }
    return out.str();
}

} // namespace attacksim
