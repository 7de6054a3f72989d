#include "attacksim/exploitdb.hpp"

#include "attacksim/error.hpp"
#include "attacksim/markup.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

namespace attacksim {

std::string OSDescriptor::label() const {
    std::string out = name;
    for (const auto* part : {&version, &edition})
        if (!part->empty()) out += " " + *part;
    if (!servicepack.empty()) out += " sp" + servicepack;
    return out;
}

const ApplicationInstance* HostProfile::application(const std::string& app_name) const {
    for (const auto& app : applications)
        if (app.name == app_name) return &app;
    return nullptr;
}

const ApplicationInstance* HostProfile::listener(std::uint16_t port) const {
    for (const auto& app : applications)
        for (auto p : app.ports)
            if (p == port) return &app;
    return nullptr;
}

std::string_view to_string(OutcomeKind kind) {
    switch (kind) {
    case OutcomeKind::None: return "none";
    case OutcomeKind::CrashOs: return "crash-os";
    case OutcomeKind::ResetOs: return "reset-os";
    case OutcomeKind::CrashApp: return "crash-app";
    case OutcomeKind::ResetApp: return "reset-app";
    case OutcomeKind::AgentInstalled: return "agent-installed";
    }
    return "?";
}

void VulnDb::add(VulnerabilityEntry entry) {
    if (index_.count(entry.id)) throw Error(ErrorCode::Validation, "duplicate vulnerability id '" + entry.id + "'");
    index_[entry.id] = entries_.size();
    entries_.push_back(std::move(entry));
}

const VulnerabilityEntry* VulnDb::find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &entries_[it->second];
}

void VulnDb::merge(const VulnDb& other) {
    for (const auto& e : other.entries_) add(e);
}

namespace {

using markup::Element;

[[noreturn]] void fail_at(const Element& e, const std::string& message) { throw ParseError(message, e.line, e.column); }

ValueSet split_set(const std::string& text) {
    ValueSet out;
    std::istringstream in(text);
    std::string word;
    while (in >> word) out.insert(word);
    return out;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string word;
    while (in >> word) out.push_back(word);
    return out;
}

const std::string& required_attr(const Element& e, const std::string& key) {
    const auto* v = e.attribute(key);
    if (!v) fail_at(e, "<" + e.name + "> lacks attribute '" + key + "'");
    return *v;
}

double parse_real(const Element& e, const std::string& key, const std::string& text) {
    double value = 0;
    auto first = text.data();
    auto last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value))
        fail_at(e, "attribute '" + key + "' is not a number: '" + text + "'");
    return value;
}

Requirement parse_requirement(const Element& e) {
    Requirement r;
    r.id = required_attr(e, "id");
    const auto& type = required_attr(e, "type");
    if (type == "system") r.type = RequirementType::System;
    else if (type == "application") r.type = RequirementType::Application;
    else if (type == "compose") r.type = RequirementType::Compose;
    else if (type == "hidden") r.type = RequirementType::Hidden;
    else fail_at(e, "unknown requirement type '" + type + "'");

    bool have_operator = false;
    for (const auto& c : e.children) {
        auto unexpected = [&] { fail_at(c, "unexpected <" + c.name + "> in " + type + " requirement '" + r.id + "'"); };
        switch (r.type) {
        case RequirementType::System:
            if (c.name == "os") {
                if (auto* v = c.attribute("name")) r.os_name = split_set(*v);
                if (auto* v = c.attribute("arch")) r.os_arch = split_set(*v);
                if (auto* v = c.attribute("version")) r.win = split_set(*v);
            } else if (c.name == "win" || c.name == "version") {
                r.win = split_set(c.text);
            } else if (c.name == "edition") {
                r.editions = split_set(c.text);
            } else if (c.name == "servicepack") {
                r.servicepacks = split_set(c.text);
            } else {
                unexpected();
            }
            break;
        case RequirementType::Application:
            if (c.name == "status") {
                auto s = c.trimmed_text();
                if (s == "target") r.status = AppRequirement::Target;
                else if (s == "running") r.status = AppRequirement::Running;
                else if (s == "installed") r.status = AppRequirement::Installed;
                else if (s == "not-running" || s == "not_running" || s == "not running") r.status = AppRequirement::NotRunning;
                else fail_at(c, "unknown application status '" + s + "'");
            } else if (c.name == "name") {
                r.app_name = c.trimmed_text();
            } else if (c.name == "version") {
                if (auto* v = c.attribute("major")) r.version_major = split_set(*v);
                if (auto* v = c.attribute("minor")) r.version_minor = split_set(*v);
            } else {
                unexpected();
            }
            break;
        case RequirementType::Compose:
            if (c.name == "operator") {
                auto s = c.trimmed_text();
                if (s == "logic_and") r.op = LogicOp::And;
                else if (s == "logic_or") r.op = LogicOp::Or;
                else fail_at(c, "unknown operator '" + s + "'");
                have_operator = true;
            } else if (c.name == "operands") {
                r.operands = split_list(c.text);
            } else {
                unexpected();
            }
            break;
        case RequirementType::Hidden:
            if (c.name == "param") {
                r.param = required_attr(c, "name");
                r.param_values = split_set(c.text);
            } else {
                unexpected();
            }
            break;
        }
    }
    if (r.type == RequirementType::Compose) {
        if (!have_operator) fail_at(e, "compose requirement '" + r.id + "' lacks an <operator>");
        if (r.operands.empty()) fail_at(e, "compose requirement '" + r.id + "' has no operands");
    }
    if (r.type == RequirementType::Hidden && r.param.empty()) fail_at(e, "hidden requirement '" + r.id + "' lacks a <param>");
    return r;
}

Draw parse_draw(const Element& e) {
    Draw d;
    if (e.name == "crash") d.kind = DrawKind::Crash;
    else if (e.name == "reset") d.kind = DrawKind::Reset;
    else if (e.name == "agent") d.kind = DrawKind::Agent;
    else if (e.name == "alarm") d.kind = DrawKind::Alarm;
    else if (e.name == "log") d.kind = DrawKind::Log;
    else if (e.name == "capture" || e.name == "session" || e.name == "cookie" || e.name == "credential" ||
             e.name == "password")
        fail_at(e, "unsupported result <" + e.name + ">");
    else
        fail_at(e, "unknown result <" + e.name + ">");

    d.chance = parse_real(e, "chance", required_attr(e, "chance"));
    if (!(d.chance >= 0.0 && d.chance <= 1.0)) fail_at(e, "chance " + required_attr(e, "chance") + " outside [0,1]");
    if (d.kind == DrawKind::Crash || d.kind == DrawKind::Reset) {
        const auto& what = required_attr(e, "what");
        if (what == "os") d.what = DrawTarget::Os;
        else if (what == "application") d.what = DrawTarget::Application;
        else fail_at(e, "unknown 'what' value '" + what + "'");
    }
    if (d.kind == DrawKind::Alarm || d.kind == DrawKind::Log) {
        if (auto* m = e.attribute("magnitude")) {
            d.magnitude = parse_real(e, "magnitude", *m);
            if (d.magnitude < 0) fail_at(e, "negative magnitude");
        }
    }
    return d;
}

void check_references(const VulnerabilityEntry& entry, const Element& at) {
    for (const auto& [id, r] : entry.requirements)
        for (const auto& op : r.operands)
            if (!entry.requirements.count(op))
                fail_at(at, "requirement '" + id + "' references undefined requirement '" + op + "'");
    // depth-first search for cycles through compose operands
    std::map<std::string, int> color;
    std::function<void(const std::string&)> visit = [&](const std::string& id) {
        color[id] = 1;
        for (const auto& op : entry.requirements.at(id).operands) {
            if (color[op] == 1) fail_at(at, "requirement cycle through '" + op + "'");
            if (color[op] == 0) visit(op);
        }
        color[id] = 2;
    };
    for (const auto& [id, r] : entry.requirements)
        if (color[id] == 0) visit(id);
}

VulnerabilityEntry parse_entry(const Element& e) {
    VulnerabilityEntry entry;
    entry.id = required_attr(e, "id");
    if (auto* v = e.attribute("name")) entry.name = *v;
    if (auto* v = e.attribute("kind")) {
        for (const auto& flag : split_set(*v)) {
            if (flag == "local") entry.local = true;
            else if (flag == "remote") entry.local = false;
            else if (flag == "exploit" || flag == "dos" || flag == "leakage") entry.category = flag;
            else fail_at(e, "unknown vulnerability kind '" + flag + "'");
        }
    }
    if (auto* v = e.attribute("noise")) {
        entry.noise_level = parse_real(e, "noise", *v);
        if (entry.noise_level < 0) fail_at(e, "negative noise level");
    }

    std::vector<const Element*> requirement_elements;
    std::vector<const Element*> result_elements;
    auto take = [&](const Element& c) {
        if (c.name == "requirement") requirement_elements.push_back(&c);
        else if (c.name == "result") result_elements.push_back(&c);
        else fail_at(c, "unexpected <" + c.name + "> in vulnerability '" + entry.id + "'");
    };
    for (const auto& c : e.children) {
        if (c.name == "requirements" || c.name == "results") {
            for (const auto& g : c.children) take(g);
        } else {
            take(c);
        }
    }

    for (const auto* r : requirement_elements) {
        auto req = parse_requirement(*r);
        if (entry.requirements.count(req.id)) fail_at(*r, "duplicate requirement id '" + req.id + "'");
        entry.requirements[req.id] = std::move(req);
    }
    check_references(entry, e);

    for (const auto* r : result_elements) {
        ResultEntry result;
        result.for_requirement = required_attr(*r, "for");
        if (!entry.requirements.count(result.for_requirement))
            fail_at(*r, "result for undefined requirement '" + result.for_requirement + "'");
        for (const auto& d : r->children) result.draws.push_back(parse_draw(d));
        entry.results.push_back(std::move(result));
    }
    return entry;
}

std::string number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string join(const ValueSet& set) {
    std::string out;
    for (const auto& v : set) {
        if (!out.empty()) out += ' ';
        out += v;
    }
    return out;
}

bool member(const ValueSet& set, const std::string& value) { return set.empty() || set.count(value) != 0; }

bool app_matches(const Requirement& r, const ApplicationInstance& app) {
    return (r.app_name.empty() || r.app_name == app.name) && member(r.version_major, app.version_major) &&
           member(r.version_minor, app.version_minor);
}

bool eval(const VulnerabilityEntry& entry, const std::string& id, const HostProfile& host,
          const ApplicationInstance* target, std::size_t depth) {
    auto it = entry.requirements.find(id);
    if (it == entry.requirements.end() || depth > entry.requirements.size()) return false;
    const auto& r = it->second;
    switch (r.type) {
    case RequirementType::System:
        return member(r.os_name, host.os.name) && member(r.os_arch, host.os.arch) && member(r.win, host.os.version) &&
               member(r.editions, host.os.edition) && member(r.servicepacks, host.os.servicepack);
    case RequirementType::Application: {
        if (r.status == AppRequirement::Target) return target && target->running() && app_matches(r, *target);
        bool any_running = false;
        bool any_installed = false;
        for (const auto& app : host.applications) {
            if (!app_matches(r, app)) continue;
            any_installed = true;
            any_running = any_running || app.running();
        }
        if (r.status == AppRequirement::Running) return any_running;
        if (r.status == AppRequirement::Installed) return any_installed;
        return !any_running;
    }
    case RequirementType::Compose:
        if (r.op == LogicOp::And) {
            for (const auto& op : r.operands)
                if (!eval(entry, op, host, target, depth + 1)) return false;
            return true;
        } else {
            for (const auto& op : r.operands)
                if (eval(entry, op, host, target, depth + 1)) return true;
            return false;
        }
    case RequirementType::Hidden: {
        auto h = host.hidden.find(r.param);
        return h != host.hidden.end() && member(r.param_values, h->second);
    }
    }
    return false;
}

} // namespace

VulnDb parse_vulndb(std::string_view document) {
    auto root = markup::parse(document);
    VulnDb db;
    auto add = [&](const Element& e) {
        auto entry = parse_entry(e);
        if (db.find(entry.id)) fail_at(e, "duplicate vulnerability id '" + entry.id + "'");
        db.add(std::move(entry));
    };
    if (root.name == "vulnerability") {
        add(root);
    } else if (root.name == "vulndb") {
        for (const auto& c : root.children) {
            if (c.name != "vulnerability") fail_at(c, "unexpected <" + c.name + "> in <vulndb>");
            add(c);
        }
    } else {
        fail_at(root, "expected <vulndb> root, found <" + root.name + ">");
    }
    return db;
}

std::string serialize(const VulnDb& db) {
    std::ostringstream out;
    auto attr = [&](const std::string& k, const std::string& v) { out << ' ' << k << "=\"" << markup::escape(v) << '"'; };
    out << "<vulndb>\n";
    for (const auto& e : db.entries()) {
        out << "  <vulnerability";
        attr("id", e.id);
        attr("name", e.name);
        attr("kind", std::string(e.local ? "local " : "remote ") + e.category);
        attr("noise", number(e.noise_level));
        out << ">\n    <requirements>\n";
        for (const auto& [id, r] : e.requirements) {
            static const char* types[] = {"system", "application", "compose", "hidden"};
            out << "      <requirement";
            attr("type", types[static_cast<int>(r.type)]);
            attr("id", id);
            out << ">\n";
            auto text = [&](const char* name, const std::string& v) {
                out << "        <" << name << '>' << markup::escape(v) << "</" << name << ">\n";
            };
            switch (r.type) {
            case RequirementType::System:
                if (!r.os_name.empty() || !r.os_arch.empty()) {
                    out << "        <os";
                    if (!r.os_name.empty()) attr("name", join(r.os_name));
                    if (!r.os_arch.empty()) attr("arch", join(r.os_arch));
                    out << " />\n";
                }
                if (!r.win.empty()) text("win", join(r.win));
                if (!r.editions.empty()) text("edition", join(r.editions));
                if (!r.servicepacks.empty()) text("servicepack", join(r.servicepacks));
                break;
            case RequirementType::Application: {
                static const char* statuses[] = {"target", "running", "installed", "not-running"};
                text("status", statuses[static_cast<int>(r.status)]);
                if (!r.app_name.empty()) text("name", r.app_name);
                if (!r.version_major.empty() || !r.version_minor.empty()) {
                    out << "        <version";
                    if (!r.version_major.empty()) attr("major", join(r.version_major));
                    if (!r.version_minor.empty()) attr("minor", join(r.version_minor));
                    out << " />\n";
                }
                break;
            }
            case RequirementType::Compose: {
                text("operator", r.op == LogicOp::And ? "logic_and" : "logic_or");
                std::string ops;
                for (const auto& op : r.operands) ops += (ops.empty() ? "" : " ") + op;
                text("operands", ops);
                break;
            }
            case RequirementType::Hidden:
                out << "        <param";
                attr("name", r.param);
                out << '>' << markup::escape(join(r.param_values)) << "</param>\n";
                break;
            }
            out << "      </requirement>\n";
        }
        out << "    </requirements>\n    <results>\n";
        for (const auto& result : e.results) {
            out << "      <result";
            attr("for", result.for_requirement);
            out << ">\n";
            for (const auto& d : result.draws) {
                static const char* kinds[] = {"crash", "reset", "agent", "alarm", "log"};
                out << "        <" << kinds[static_cast<int>(d.kind)];
                attr("chance", number(d.chance));
                if (d.kind == DrawKind::Crash || d.kind == DrawKind::Reset)
                    attr("what", d.what == DrawTarget::Os ? "os" : "application");
                if (d.kind == DrawKind::Alarm || d.kind == DrawKind::Log) attr("magnitude", number(d.magnitude));
                out << " />\n";
            }
            out << "      </result>\n";
        }
        out << "    </results>\n  </vulnerability>\n";
    }
    out << "</vulndb>\n";
    return out.str();
}

bool eval_requirement(const VulnerabilityEntry& entry, const std::string& id, const HostProfile& host,
                      const ApplicationInstance* target) {
    return eval(entry, id, host, target, 0);
}

Resolution resolve_exploit(const VulnerabilityEntry& entry, const HostProfile& host, const ApplicationInstance* target,
                           RandomSource& rng) {
    Resolution res;
    for (const auto& result : entry.results) {
        if (!eval_requirement(entry, result.for_requirement, host, target)) continue;
        res.matched_requirement = result.for_requirement;
        for (const auto& d : result.draws) {
            if (d.chance <= 0) continue;
            double u = rng.next01();
            if (!(u < d.chance)) continue;
            switch (d.kind) {
            case DrawKind::Alarm:
            case DrawKind::Log:
                res.noise.push_back({d.kind, d.magnitude});
                continue;
            case DrawKind::Crash:
                res.kind = d.what == DrawTarget::Os ? OutcomeKind::CrashOs : OutcomeKind::CrashApp;
                return res;
            case DrawKind::Reset:
                res.kind = d.what == DrawTarget::Os ? OutcomeKind::ResetOs : OutcomeKind::ResetApp;
                return res;
            case DrawKind::Agent:
                res.kind = OutcomeKind::AgentInstalled;
                return res;
            }
        }
        return res;
    }
    return res;
}

} // namespace attacksim
