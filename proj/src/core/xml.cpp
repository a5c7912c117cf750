// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "core/xml.hpp"

#include <cctype>

namespace wbc {

const XmlElement* XmlElement::child(const std::string& child_name) const {
    for (const auto& c : children)
        if (c.name == child_name) return &c;
    return nullptr;
}

const XmlElement& XmlElement::require(const std::string& child_name) const {
    const XmlElement* c = child(child_name);
    if (!c) throw XmlError("missing <" + child_name + "> element inside <" + name + ">", line);
    return *c;
}

std::vector<const XmlElement*> XmlElement::children_named(const std::string& child_name) const {
    std::vector<const XmlElement*> out;
    for (const auto& c : children)
        if (c.name == child_name) out.push_back(&c);
    return out;
}

namespace {

class Parser {
public:
    explicit Parser(const std::string& text) : text_(text) {}

    XmlElement parse_document() {
        skip_prolog();
        XmlElement root = parse_element();
        skip_misc();
        if (pos_ < text_.size()) fail("content after document element");
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& message) const { throw XmlError(message, line_); }

    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }

    char take() {
        if (eof()) fail("unexpected end of input");
        const char c = text_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }

    bool starts_with(const char* s) const { return text_.compare(pos_, std::strlen(s), s) == 0; }

    void expect(const char* s) {
        if (!starts_with(s)) fail(std::string("expected '") + s + "'");
        for (std::size_t i = 0; s[i]; ++i) take();
    }

    void skip_ws() {
        while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) take();
    }

    void skip_comment() {
        expect("<!--");
        while (!starts_with("-->")) take();
        expect("-->");
    }

    void skip_prolog() {
        // byte-order mark, xml declaration, doctype, comments
        if (text_.compare(0, 3, "\xEF\xBB\xBF") == 0) pos_ = 3;
        skip_misc();
        if (starts_with("<?")) {
            while (!starts_with("?>")) take();
            expect("?>");
        }
        skip_misc();
        if (starts_with("<!DOCTYPE")) {
            while (!eof() && peek() != '>') take();
            expect(">");
        }
        skip_misc();
    }

    void skip_misc() {
        skip_ws();
        while (starts_with("<!--")) {
            skip_comment();
            skip_ws();
        }
    }

    static bool is_name_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' ||
               c == ':';
    }

    std::string parse_name() {
        std::string name;
        while (!eof() && is_name_char(peek())) name += take();
        if (name.empty()) fail("expected a name");
        return name;
    }

    std::string decode_entity() {
        expect("&");
        std::string entity;
        while (!eof() && peek() != ';') entity += take();
        expect(";");
        if (entity == "amp") return "&";
        if (entity == "lt") return "<";
        if (entity == "gt") return ">";
        if (entity == "quot") return "\"";
        if (entity == "apos") return "'";
        fail("unknown entity &" + entity + ";");
    }

    std::string parse_attr_value() {
        const char quote = take();
        if (quote != '"' && quote != '\'') fail("attribute value must be quoted");
        std::string value;
        while (!eof() && peek() != quote) {
            if (peek() == '&') value += decode_entity();
            else value += take();
        }
        expect(std::string(1, quote).c_str());
        return value;
    }

    XmlElement parse_element() {
        if (eof() || peek() != '<') fail("expected '<'");
        XmlElement el;
        el.line = line_;
        take();  // <
        el.name = parse_name();

        skip_ws();
        while (!eof() && peek() != '>' && peek() != '/') {
            const std::string attr = parse_name();
            skip_ws();
            expect("=");
            skip_ws();
            el.attributes[attr] = parse_attr_value();
            skip_ws();
        }
        if (starts_with("/>")) {
            expect("/>");
            return el;
        }
        expect(">");

        std::string text;
        bool has_non_ws_text = false;
        while (true) {
            if (eof()) fail("unterminated <" + el.name + ">");
            if (starts_with("<!--")) {
                skip_comment();
            } else if (starts_with("</")) {
                expect("</");
                const int close_line = line_;
                const std::string close = parse_name();
                skip_ws();
                expect(">");
                if (close != el.name)
                    throw XmlError("mismatched </" + close + "> for <" + el.name + ">", close_line);
                break;
            } else if (peek() == '<') {
                el.children.push_back(parse_element());
            } else if (peek() == '&') {
                text += decode_entity();
                has_non_ws_text = true;
            } else {
                const char c = take();
                text += c;
                if (!std::isspace(static_cast<unsigned char>(c))) has_non_ws_text = true;
            }
        }
        // keep character data verbatim for leaf elements; treat whitespace
        // between child elements as formatting
        if (el.children.empty() && (has_non_ws_text || !text.empty())) el.text = text;
        if (!el.children.empty() && has_non_ws_text)
            throw XmlError("mixed text and elements inside <" + el.name + ">", el.line);
        return el;
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    int line_ = 1;
};

void serialize_into(const XmlElement& el, std::string& out, int depth) {
    const std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
    out += indent + "<" + el.name;
    for (const auto& [k, v] : el.attributes) out += " " + k + "=\"" + xml_escape(v) + "\"";
    if (el.children.empty() && el.text.empty()) {
        out += "/>\n";
        return;
    }
    out += ">";
    if (el.children.empty()) {
        out += xml_escape(el.text) + "</" + el.name + ">\n";
        return;
    }
    out += "\n";
    for (const auto& c : el.children) serialize_into(c, out, depth + 1);
    out += indent + "</" + el.name + ">\n";
}

}  // namespace

XmlElement xml_parse(const std::string& text) { return Parser(text).parse_document(); }

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string xml_serialize(const XmlElement& root) {
    std::string out;
    serialize_into(root, out, 0);
    return out;
}

}  // namespace wbc
