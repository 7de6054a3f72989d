#include "attacksim/markup.hpp"

#include "attacksim/error.hpp"

#include <cctype>

namespace attacksim::markup {

namespace {

bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == ':';
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Element document() {
        skip_misc();
        if (at_end() || peek() != '<') fail("expected root element");
        Element root = element();
        skip_misc();
        if (!at_end()) fail("content after root element");
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& message) const { throw ParseError(message, line_, column_); }

    bool at_end() const { return pos_ >= text_.size(); }
    char peek(std::size_t ahead = 0) const { return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0'; }
    bool starts_with(std::string_view s) const { return text_.substr(pos_, s.size()) == s; }

    void advance(std::size_t n = 1) {
        for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i) {
            if (text_[pos_] == '\n') {
                ++line_;
                column_ = 1;
            } else {
                ++column_;
            }
            ++pos_;
        }
    }

    void expect(std::string_view s) {
        if (!starts_with(s)) fail("expected '" + std::string(s) + "'");
        advance(s.size());
    }

    void skip_space() {
        while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) advance();
    }

    void skip_until(std::string_view terminator, const char* what) {
        while (!at_end() && !starts_with(terminator)) advance();
        if (at_end()) fail(std::string("unterminated ") + what);
        advance(terminator.size());
    }

    // whitespace, comments and processing instructions between elements
    void skip_misc() {
        for (;;) {
            skip_space();
            if (starts_with("<!--")) {
                skip_until("-->", "comment");
            } else if (starts_with("<?")) {
                skip_until("?>", "processing instruction");
            } else {
                return;
            }
        }
    }

    std::string name() {
        std::size_t start = pos_;
        while (!at_end() && is_name_char(peek())) advance();
        if (start == pos_) fail("expected a name");
        return std::string(text_.substr(start, pos_ - start));
    }

    std::string decode(std::string_view raw, std::size_t line, std::size_t column) const {
        std::string out;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] != '&') {
                out.push_back(raw[i]);
                continue;
            }
            auto semi = raw.find(';', i);
            if (semi == std::string_view::npos) throw ParseError("unterminated entity", line, column);
            auto entity = raw.substr(i + 1, semi - i - 1);
            if (entity == "lt") out.push_back('<');
            else if (entity == "gt") out.push_back('>');
            else if (entity == "amp") out.push_back('&');
            else if (entity == "quot") out.push_back('"');
            else if (entity == "apos") out.push_back('\'');
            else throw ParseError("unknown entity '&" + std::string(entity) + ";'", line, column);
            i = semi;
        }
        return out;
    }

    Element element() {
        Element e;
        e.line = line_;
        e.column = column_;
        expect("<");
        e.name = name();
        for (;;) {
            skip_space();
            if (starts_with("/>")) {
                advance(2);
                return e;
            }
            if (peek() == '>') {
                advance();
                break;
            }
            auto attr_line = line_;
            auto attr_col = column_;
            auto key = name();
            skip_space();
            expect("=");
            skip_space();
            char quote = peek();
            if (quote != '"' && quote != '\'') fail("expected quoted attribute value");
            advance();
            std::size_t start = pos_;
            while (!at_end() && peek() != quote) {
                if (peek() == '<') fail("'<' inside attribute value");
                advance();
            }
            if (at_end()) fail("unterminated attribute value");
            auto raw = text_.substr(start, pos_ - start);
            advance();
            if (e.attributes.count(key)) throw ParseError("duplicate attribute '" + key + "'", attr_line, attr_col);
            e.attributes[key] = decode(raw, attr_line, attr_col);
        }
        // content
        for (;;) {
            if (at_end()) throw ParseError("unclosed element <" + e.name + ">", e.line, e.column);
            if (starts_with("</")) {
                advance(2);
                auto closing = name();
                if (closing != e.name) fail("mismatched </" + closing + ">, expected </" + e.name + ">");
                skip_space();
                expect(">");
                return e;
            }
            if (starts_with("<!--")) {
                skip_until("-->", "comment");
            } else if (starts_with("<?")) {
                skip_until("?>", "processing instruction");
            } else if (starts_with("<![CDATA[") || starts_with("<!")) {
                fail("unsupported markup declaration");
            } else if (peek() == '<') {
                e.children.push_back(element());
            } else {
                auto text_line = line_;
                auto text_col = column_;
                std::size_t start = pos_;
                while (!at_end() && peek() != '<') advance();
                e.text += decode(text_.substr(start, pos_ - start), text_line, text_col);
            }
        }
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t column_ = 1;
};

} // namespace

const std::string* Element::attribute(const std::string& key) const {
    auto it = attributes.find(key);
    return it == attributes.end() ? nullptr : &it->second;
}

const Element* Element::child(std::string_view child_name) const {
    for (const auto& c : children)
        if (c.name == child_name) return &c;
    return nullptr;
}

std::string Element::trimmed_text() const {
    auto b = text.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = text.find_last_not_of(" \t\r\n");
    return text.substr(b, e - b + 1);
}

Element parse(std::string_view document) { return Parser(document).document(); }

std::string escape(std::string_view text) {
    std::string out;
    for (char c : text) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

} // namespace attacksim::markup
