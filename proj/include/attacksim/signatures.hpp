#pragma once

// Banner signature database for OS detection. One rule per line:
//
//   <banner substring> => <os>[/<version>]:<probability>, ...
//
// Blank lines and lines starting with '#' are ignored. The first rule whose
// substring occurs in the banner applies.

#include <string>
#include <string_view>
#include <vector>

namespace attacksim {

struct OsHypothesis {
    std::string os;
    std::string version;
    double probability = 0;
};

struct SignatureRule {
    std::string pattern;
    std::vector<OsHypothesis> hypotheses;
};

class SignatureDb {
public:
    /// Throws ParseError on malformed lines or per-rule mass above 1.
    static SignatureDb parse(std::string_view text);

    void add(SignatureRule rule);
    const SignatureRule* match(std::string_view banner) const;
    const std::vector<SignatureRule>& rules() const { return rules_; }
    std::string to_text() const;

private:
    std::vector<SignatureRule> rules_;
};

} // namespace attacksim
