// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Parser for a device-tree-source subset: flat node blocks of the form
// `name { key = value; ... };` with quoted-string, cell-list and bare-word
// values, // comments, and fixed two-cell addresses and sizes. Just enough
// grammar to describe a peripheral's register window and secure status.

#include <cctype>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fortress/errors.hpp"

namespace fortress::devtree {

struct DeviceNode {
  enum class Status : uint8_t { Okay, Disabled };
  enum class SecureStatus : uint8_t { NonSecure, Secure };

  std::string name;
  std::vector<std::string> compatible;
  std::vector<std::pair<uint64_t, uint64_t>> reg;  // (base, size)
  Status status = Status::Okay;
  SecureStatus secure_status = SecureStatus::NonSecure;
  /// Uninterpreted properties, raw value text, in document order.
  std::vector<std::pair<std::string, std::string>> properties;

  bool operator==(const DeviceNode&) const = default;
};

namespace detail {

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  std::vector<DeviceNode> run() {
    std::vector<DeviceNode> nodes;
    std::set<std::string> seen;
    skip_blank();
    while (!eof()) {
      DeviceNode node = parse_node();
      if (!seen.insert(node.name).second)
        throw DuplicateNodeName("duplicate node name '" + node.name + "'");
      nodes.push_back(std::move(node));
      skip_blank();
    }
    return nodes;
  }

 private:
  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return eof() ? '\0' : text_[pos_]; }

  char advance() {
    char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_blank() {
    while (!eof()) {
      char c = peek();
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
        while (!eof() && peek() != '\n') advance();
      } else {
        break;
      }
    }
  }

  void expect(char c, const char* what) {
    skip_blank();
    if (eof() || peek() != c)
      throw SyntaxError(std::string("expected '") + c + "' " + what, line_);
    advance();
  }

  static bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
           c == '@' || c == ',' || c == '.' || c == '+' || c == '#';
  }

  std::string word(const char* what) {
    skip_blank();
    std::string out;
    while (!eof() && is_word_char(peek())) out.push_back(advance());
    if (out.empty())
      throw SyntaxError(std::string("expected ") + what, line_);
    return out;
  }

  std::string quoted_string() {
    expect('"', "to open string");
    std::string out;
    while (!eof() && peek() != '"') {
      if (peek() == '\n') throw SyntaxError("unterminated string", line_);
      out.push_back(advance());
    }
    expect('"', "to close string");
    return out;
  }

  uint64_t cell() {
    std::string w = word("cell value");
    const bool hex = w.starts_with("0x") || w.starts_with("0X");
    const std::string digits = hex ? w.substr(2) : w;
    if (digits.empty()) throw SyntaxError("bad cell value '" + w + "'", line_);
    uint64_t v = 0;
    for (char c : digits) {
      int d = 0;
      if (c >= '0' && c <= '9')
        d = c - '0';
      else if (hex && c >= 'a' && c <= 'f')
        d = c - 'a' + 10;
      else if (hex && c >= 'A' && c <= 'F')
        d = c - 'A' + 10;
      else
        throw SyntaxError("bad cell value '" + w + "'", line_);
      v = v * (hex ? 16 : 10) + static_cast<uint64_t>(d);
      if (v > 0xFFFFFFFFull)
        throw SyntaxError("cell value '" + w + "' exceeds 32 bits", line_);
    }
    return v;
  }

  DeviceNode parse_node() {
    const int node_line = line_;
    DeviceNode node;
    node.name = word("node name");
    expect('{', "after node name");
    bool have_compatible = false;
    while (true) {
      skip_blank();
      if (eof())
        throw SyntaxError("node '" + node.name + "' missing closing brace",
                          node_line);
      if (peek() == '}') {
        advance();
        break;
      }
      parse_property(node, have_compatible);
    }
    expect(';', "after node block");
    if (!have_compatible)
      throw SyntaxError("node '" + node.name + "' has no compatible property",
                        node_line);
    return node;
  }

  void parse_property(DeviceNode& node, bool& have_compatible) {
    const int prop_line = line_;
    std::string key = word("property name");
    expect('=', "after property name");
    skip_blank();
    if (key == "compatible") {
      node.compatible.push_back(quoted_string());
      while (true) {
        skip_blank();
        if (peek() != ',') break;
        advance();
        node.compatible.push_back(quoted_string());
      }
      have_compatible = true;
    } else if (key == "reg") {
      std::vector<uint64_t> cells = cell_list();
      if (cells.empty() || cells.size() % 4 != 0)
        throw SyntaxError("reg needs 2 address + 2 size cells per entry",
                          prop_line);
      for (size_t i = 0; i < cells.size(); i += 4) {
        uint64_t base = cells[i] << 32 | cells[i + 1];
        uint64_t size = cells[i + 2] << 32 | cells[i + 3];
        if (size == 0) throw SyntaxError("reg entry has zero size", prop_line);
        node.reg.emplace_back(base, size);
      }
    } else if (key == "status") {
      std::string v = quoted_string();
      if (v == "okay")
        node.status = DeviceNode::Status::Okay;
      else if (v == "disabled")
        node.status = DeviceNode::Status::Disabled;
      else
        throw SyntaxError("status must be \"okay\" or \"disabled\"", prop_line);
    } else if (key == "secure-status") {
      std::string v = quoted_string();
      if (v == "secure")
        node.secure_status = DeviceNode::SecureStatus::Secure;
      else if (v == "nonsecure")
        node.secure_status = DeviceNode::SecureStatus::NonSecure;
      else
        throw SyntaxError("secure-status must be \"secure\" or \"nonsecure\"",
                          prop_line);
    } else {
      node.properties.emplace_back(key, raw_value());
    }
    expect(';', "after property value");
  }

  std::vector<uint64_t> cell_list() {
    expect('<', "to open cell list");
    std::vector<uint64_t> cells;
    while (true) {
      skip_blank();
      if (eof()) throw SyntaxError("unterminated cell list", line_);
      if (peek() == '>') {
        advance();
        break;
      }
      cells.push_back(cell());
    }
    return cells;
  }

  /// Capture an uninterpreted value verbatim up to the terminating ';'.
  std::string raw_value() {
    skip_blank();
    std::string out;
    bool in_string = false;
    while (!eof()) {
      char c = peek();
      if (!in_string && c == ';') break;
      if (c == '\n') throw SyntaxError("unterminated property value", line_);
      if (c == '"') in_string = !in_string;
      out.push_back(advance());
    }
    while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back())))
      out.pop_back();
    if (out.empty()) throw SyntaxError("empty property value", line_);
    return out;
  }

  const std::string& text_;
  size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace detail

inline std::vector<DeviceNode> parse(const std::string& dts_text) {
  return detail::Parser(dts_text).run();
}

/// Canonical printer; print(parse(x)) reparses to an equal node list.
inline std::string print(const std::vector<DeviceNode>& nodes) {
  std::ostringstream os;
  for (const auto& n : nodes) {
    os << n.name << " {\n";
    os << "  compatible = ";
    for (size_t i = 0; i < n.compatible.size(); ++i)
      os << (i ? ", " : "") << '"' << n.compatible[i] << '"';
    os << ";\n";
    if (!n.reg.empty()) {
      os << "  reg = <";
      for (size_t i = 0; i < n.reg.size(); ++i) {
        if (i) os << ' ';
        os << "0x" << std::hex << (n.reg[i].first >> 32) << " 0x"
           << (n.reg[i].first & 0xFFFFFFFF) << " 0x" << (n.reg[i].second >> 32)
           << " 0x" << (n.reg[i].second & 0xFFFFFFFF) << std::dec;
      }
      os << ">;\n";
    }
    if (n.status == DeviceNode::Status::Disabled) os << "  status = \"disabled\";\n";
    if (n.secure_status == DeviceNode::SecureStatus::Secure)
      os << "  secure-status = \"secure\";\n";
    for (const auto& kv : n.properties)
      os << "  " << kv.first << " = " << kv.second << ";\n";
    os << "};\n\n";
  }
  return os.str();
}

inline std::vector<DeviceNode> find_by_compatible(
    const std::vector<DeviceNode>& nodes, const std::string& pattern) {
  std::vector<DeviceNode> out;
  for (const auto& n : nodes)
    for (const auto& c : n.compatible)
      if (c.find(pattern) != std::string::npos) {
        out.push_back(n);
        break;
      }
  return out;
}

/// Register windows of enabled, secure-marked nodes.
inline std::vector<std::pair<uint64_t, uint64_t>> secure_regions(
    const std::vector<DeviceNode>& nodes) {
  std::vector<std::pair<uint64_t, uint64_t>> out;
  for (const auto& n : nodes)
    if (n.secure_status == DeviceNode::SecureStatus::Secure &&
        n.status == DeviceNode::Status::Okay)
      for (const auto& r : n.reg) out.push_back(r);
  return out;
}

}  // namespace fortress::devtree
