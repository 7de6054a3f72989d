#pragma once

// Minimal XML reader for the vulnerability database: elements, attributes,
// character data, comments, processing instructions and the five predefined
// entities. No DTDs, namespaces or CDATA.

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace attacksim::markup {

struct Element {
    std::string name;
    std::map<std::string, std::string> attributes;
    std::vector<Element> children;
    std::string text;  // concatenated character data, entity-decoded
    std::size_t line = 0;
    std::size_t column = 0;

    const std::string* attribute(const std::string& key) const;
    const Element* child(std::string_view child_name) const;
    /// Text with leading/trailing whitespace removed.
    std::string trimmed_text() const;
};

/// Throws ParseError with line/column on malformed input.
Element parse(std::string_view document);

std::string escape(std::string_view text);

} // namespace attacksim::markup
