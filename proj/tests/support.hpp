#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "uqkit/core.hpp"

namespace testsupport {

// y = x sin x + N(0, (0.5 + 0.3|x|)^2), x ~ U(-5, 5)
inline uq::Dataset heteroscedastic(std::size_t n, std::uint64_t seed) {
  uq::RngStream rng(seed);
  uq::Matrix x(n, 1);
  uq::Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = rng.uniform(-5.0, 5.0);
    x(i, 0) = v;
    y[i] = v * std::sin(v) + (0.5 + 0.3 * std::abs(v)) * rng.normal();
  }
  return uq::make_dataset(std::move(x), std::move(y), uq::Task::regression());
}

// y = 2 x0 - x1 + 0.5 + N(0, noise^2)
inline uq::Dataset linear(std::size_t n, std::size_t d, double noise, std::uint64_t seed) {
  uq::RngStream rng(seed);
  uq::Matrix x(n, d);
  uq::Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = 0.5;
    for (std::size_t j = 0; j < d; ++j) {
      x(i, j) = rng.normal();
      t += (j == 0 ? 2.0 : (j == 1 ? -1.0 : 0.3)) * x(i, j);
    }
    y[i] = t + noise * rng.normal();
  }
  return uq::make_dataset(std::move(x), std::move(y), uq::Task::regression());
}

// Two Gaussian blobs per class along a line; k classes.
inline uq::Dataset blobs(std::size_t n, std::size_t k, double spread, std::uint64_t seed) {
  uq::RngStream rng(seed);
  uq::Matrix x(n, 2);
  uq::Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % k;
    x(i, 0) = static_cast<double>(c) * 2.0 + spread * rng.normal();
    x(i, 1) = (c % 2 ? 1.0 : -1.0) + spread * rng.normal();
    y[i] = static_cast<double>(c);
  }
  return uq::make_dataset(std::move(x), std::move(y), uq::Task::classification(k));
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("uqkit_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)) + "_" +
             std::to_string(std::rand()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Minimal XML well-formedness check: prolog, comments, nested elements with
// quoted attributes, character data and the predefined/numeric entities.
struct XmlResult {
  bool ok = false;
  std::string error;
  std::string root;
  std::map<std::string, std::string> root_attributes;
  std::size_t elements = 0;
};

inline XmlResult check_xml(const std::string& s) {
  XmlResult r;
  std::size_t i = 0;
  std::vector<std::string> stack;
  bool seen_root = false;
  auto fail = [&](const std::string& msg) {
    r.ok = false;
    r.error = msg + " at offset " + std::to_string(i);
    return r;
  };
  auto is_name_char = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == ':' || c == '.';
  };
  auto check_entities = [&](const std::string& text) -> bool {
    for (std::size_t p = 0; p < text.size(); ++p) {
      if (text[p] == '<') return false;
      if (text[p] != '&') continue;
      const std::size_t semi = text.find(';', p);
      if (semi == std::string::npos) return false;
      const std::string ent = text.substr(p + 1, semi - p - 1);
      if (ent != "amp" && ent != "lt" && ent != "gt" && ent != "quot" && ent != "apos") {
        if (ent.size() < 2 || ent[0] != '#') return false;
      }
      p = semi;
    }
    return true;
  };
  if (s.compare(0, 5, "<?xml") == 0) {
    const std::size_t end = s.find("?>");
    if (end == std::string::npos) return fail("unterminated prolog");
    i = end + 2;
  }
  while (i < s.size()) {
    if (s[i] != '<') {
      const std::size_t next = s.find('<', i);
      const std::string text = s.substr(i, next == std::string::npos ? std::string::npos : next - i);
      if (stack.empty()) {
        for (char c : text)
          if (!std::isspace(static_cast<unsigned char>(c))) return fail("text outside the root element");
      } else if (!check_entities(text)) {
        return fail("bad character data");
      }
      if (next == std::string::npos) break;
      i = next;
      continue;
    }
    if (s.compare(i, 4, "<!--") == 0) {
      const std::size_t end = s.find("-->", i);
      if (end == std::string::npos) return fail("unterminated comment");
      i = end + 3;
      continue;
    }
    if (s.compare(i, 2, "</") == 0) {
      std::size_t j = i + 2;
      while (j < s.size() && is_name_char(s[j])) ++j;
      const std::string name = s.substr(i + 2, j - i - 2);
      while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      if (j >= s.size() || s[j] != '>') return fail("bad end tag");
      if (stack.empty() || stack.back() != name) return fail("mismatched end tag </" + name + ">");
      stack.pop_back();
      i = j + 1;
      continue;
    }
    std::size_t j = i + 1;
    while (j < s.size() && is_name_char(s[j])) ++j;
    const std::string name = s.substr(i + 1, j - i - 1);
    if (name.empty()) return fail("empty element name");
    if (stack.empty() && seen_root) return fail("second root element");
    std::map<std::string, std::string> attrs;
    for (;;) {
      while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      if (j >= s.size()) return fail("unterminated start tag");
      if (s[j] == '>' || s.compare(j, 2, "/>") == 0) break;
      std::size_t k = j;
      while (k < s.size() && is_name_char(s[k])) ++k;
      const std::string attr = s.substr(j, k - j);
      if (attr.empty() || k >= s.size() || s[k] != '=') return fail("bad attribute in <" + name + ">");
      ++k;
      if (k >= s.size() || (s[k] != '"' && s[k] != '\'')) return fail("unquoted attribute");
      const char q = s[k];
      const std::size_t end = s.find(q, k + 1);
      if (end == std::string::npos) return fail("unterminated attribute");
      const std::string value = s.substr(k + 1, end - k - 1);
      if (!check_entities(value)) return fail("bad attribute value");
      if (attrs.count(attr)) return fail("duplicate attribute " + attr);
      attrs[attr] = value;
      j = end + 1;
    }
    ++r.elements;
    if (stack.empty()) {
      seen_root = true;
      r.root = name;
      r.root_attributes = attrs;
    }
    if (s[j] == '>') {
      stack.push_back(name);
      i = j + 1;
    } else {
      i = j + 2;
    }
  }
  if (!stack.empty()) return fail("unclosed element <" + stack.back() + ">");
  if (!seen_root) return fail("no root element");
  r.ok = true;
  return r;
}

}  // namespace testsupport
