#include "vipcop/cli/toml.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vipcop/error.hpp"

namespace vipcop::cli {

using nlohmann::json;

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  json run() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        ++pos_;
        if (peek() == '[') fail("arrays of tables are not supported");
        skip_ws();
        const auto path = parse_key_path();
        skip_ws();
        expect(']');
        table = &descend(root, path, true);
      } else {
        const auto path = parse_key_path();
        skip_ws();
        expect('=');
        skip_ws();
        json value = parse_value();
        assign(*table, path, std::move(value));
      }
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line_) + ": " + what);
  }
  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }
  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') ++pos_;
    }
  }
  void newline() {
    if (peek() == '\r') ++pos_;
    if (peek() == '\n') {
      ++pos_;
      ++line_;
    }
  }
  void skip_blank_lines() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        newline();
      } else {
        break;
      }
    }
  }
  // Whitespace, comments and newlines inside arrays and inline tables.
  void skip_space_nl() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        newline();
      } else {
        break;
      }
    }
  }
  void end_of_line() {
    skip_ws();
    skip_comment();
    if (eof()) return;
    if (peek() != '\n' && peek() != '\r') fail("unexpected trailing text");
    newline();
  }

  std::string parse_key() {
    if (peek() == '"') return parse_basic_string();
    if (peek() == '\'') return parse_literal_string();
    const auto start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) {
      ++pos_;
    }
    if (start == pos_) fail("expected a key");
    return std::string(s_.substr(start, pos_ - start));
  }
  std::vector<std::string> parse_key_path() {
    std::vector<std::string> path{parse_key()};
    skip_ws();
    while (peek() == '.') {
      ++pos_;
      skip_ws();
      path.push_back(parse_key());
      skip_ws();
    }
    return path;
  }

  json& descend(json& root, const std::vector<std::string>& path, bool header) {
    json* node = &root;
    for (const auto& key : path) {
      if (!node->contains(key)) {
        (*node)[key] = json::object();
      } else if (!(*node)[key].is_object()) {
        fail("key '" + key + "' is not a table");
      }
      node = &(*node)[key];
    }
    if (header) {
      std::string joined;
      for (const auto& k : path) joined += (joined.empty() ? "" : ".") + k;
      if (!defined_.insert(joined).second) fail("table [" + joined + "] defined twice");
    }
    return *node;
  }
  void assign(json& table, const std::vector<std::string>& path, json value) {
    json& parent = descend(table, {path.begin(), path.end() - 1}, false);
    if (parent.contains(path.back())) fail("duplicate key '" + path.back() + "'");
    parent[path.back()] = std::move(value);
  }

  std::string parse_basic_string() {
    expect('"');
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = s_[pos_++];
      if (c == '"') break;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated escape");
      c = s_[pos_++];
      switch (c) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case 'b': out += '\b'; break;
        case 'f': out += '\f'; break;
        case 'u': {
          if (pos_ + 4 > s_.size()) fail("short \\u escape");
          unsigned code = 0;
          const auto hex = s_.substr(pos_, 4);
          if (std::from_chars(hex.data(), hex.data() + 4, code, 16).ptr != hex.data() + 4) {
            fail("bad \\u escape");
          }
          pos_ += 4;
          if (code < 0x80) {
            out += static_cast<char>(code);
          } else if (code < 0x800) {
            out += static_cast<char>(0xC0 | (code >> 6));
            out += static_cast<char>(0x80 | (code & 0x3F));
          } else {
            out += static_cast<char>(0xE0 | (code >> 12));
            out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (code & 0x3F));
          }
          break;
        }
        default: fail(std::string("unknown escape \\") + c);
      }
    }
    return out;
  }
  std::string parse_literal_string() {
    expect('\'');
    const auto start = pos_;
    while (!eof() && peek() != '\'' && peek() != '\n') ++pos_;
    if (peek() != '\'') fail("unterminated literal string");
    std::string out(s_.substr(start, pos_ - start));
    ++pos_;
    return out;
  }

  json parse_value() {
    const char c = peek();
    if (c == '"') return parse_basic_string();
    if (c == '\'') return parse_literal_string();
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    const auto start = pos_;
    while (!eof() && peek() != ',' && peek() != ']' && peek() != '}' && peek() != '#' &&
           peek() != '\n' && peek() != '\r' && peek() != ' ' && peek() != '\t') {
      ++pos_;
    }
    std::string tok(s_.substr(start, pos_ - start));
    if (tok.empty()) fail("expected a value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    return parse_number(tok);
  }
  json parse_number(std::string tok) {
    std::string clean;
    for (char ch : tok) {
      if (ch != '_') clean += ch;
    }
    std::string body = clean;
    if (!body.empty() && (body[0] == '+' || body[0] == '-')) body = body.substr(1);
    const bool negative = !clean.empty() && clean[0] == '-';
    if (body == "inf") return negative ? -std::numeric_limits<double>::infinity()
                                      : std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    const bool is_float = body.find_first_of(".eE") != std::string::npos;
    if (!is_float) {
      std::int64_t v = 0;
      const char* b = body.data();
      const auto [p, ec] = std::from_chars(b, b + body.size(), v);
      if (ec != std::errc() || p != b + body.size()) fail("bad value '" + tok + "'");
      return negative ? -v : v;
    }
    double v = 0.0;
    const char* b = body.data();
    const auto [p, ec] = std::from_chars(b, b + body.size(), v);
    if (ec != std::errc() || p != b + body.size()) fail("bad value '" + tok + "'");
    return negative ? -v : v;
  }
  json parse_array() {
    expect('[');
    json arr = json::array();
    skip_space_nl();
    while (peek() != ']') {
      arr.push_back(parse_value());
      skip_space_nl();
      if (peek() == ',') {
        ++pos_;
        skip_space_nl();
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
    ++pos_;
    return arr;
  }
  json parse_inline_table() {
    expect('{');
    json table = json::object();
    skip_ws();
    while (peek() != '}') {
      const auto path = parse_key_path();
      skip_ws();
      expect('=');
      skip_ws();
      assign(table, path, parse_value());
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        skip_ws();
      } else if (peek() != '}') {
        fail("expected ',' or '}' in inline table");
      }
    }
    ++pos_;
    return table;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::set<std::string> defined_;
};

}  // namespace

json parse_toml(std::string_view text) { return Parser(text).run(); }

json load_toml(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_toml(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace vipcop::cli
