// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace wbc {

// Small element-tree XML reader/writer covering the subset annotation
// files use: elements, attributes, character data, comments, declarations
// and the five predefined entities. Parse errors carry the 1-based source
// line of the offending construct.
struct XmlError : std::runtime_error {
    XmlError(const std::string& message, int line_number)
        : std::runtime_error(message + " (line " + std::to_string(line_number) + ")"),
          line(line_number) {}
    int line;
};

struct XmlElement {
    std::string name;
    std::map<std::string, std::string> attributes;
    std::vector<XmlElement> children;
    std::string text;  // character data; empty when the element has children
    int line = 0;

    const XmlElement* child(const std::string& child_name) const;
    // Throws XmlError naming the missing element.
    const XmlElement& require(const std::string& child_name) const;
    std::vector<const XmlElement*> children_named(const std::string& child_name) const;
};

XmlElement xml_parse(const std::string& text);

std::string xml_escape(const std::string& s);
std::string xml_serialize(const XmlElement& root);

}  // namespace wbc
