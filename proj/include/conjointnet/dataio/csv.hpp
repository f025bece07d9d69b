#pragma once

#include <fstream>
#include <istream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/algorithm/string/trim.hpp>
#include <boost/tokenizer.hpp>

#include "conjointnet/errors.hpp"

namespace conjointnet::csv {

// Splits one delimited line; double-quoted fields may contain the delimiter.
// Surrounding whitespace is trimmed from every field.
inline std::vector<std::string> split_line(const std::string& line, char delimiter = ',') {
  using Separator = boost::escaped_list_separator<char>;
  std::string body = line;
  if (!body.empty() && body.back() == '\r') body.pop_back();
  std::vector<std::string> out;
  try {
    boost::tokenizer<Separator> tok(body, Separator('\0', delimiter, '"'));
    for (auto field : tok) {
      boost::algorithm::trim(field);
      out.push_back(std::move(field));
    }
  } catch (const boost::escaped_list_error& e) {
    throw DataError(std::string("malformed delimited line: ") + e.what());
  }
  return out;
}

// Streaming reader over a header-first delimited file.
class Reader {
 public:
  explicit Reader(std::istream& in, char delimiter = ',') : in_(in), delimiter_(delimiter) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      if (is_blank(line)) continue;
      header_ = split_line(line, delimiter_);
      if (!header_.empty() && header_.front().rfind("\xEF\xBB\xBF", 0) == 0) header_.front().erase(0, 3);
      for (std::size_t i = 0; i < header_.size(); ++i) index_.emplace(header_[i], i);
      return;
    }
    throw DataError("delimited input has no header line");
  }

  const std::vector<std::string>& header() const { return header_; }

  std::optional<std::size_t> find(const std::string& column) const {
    const auto it = index_.find(column);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Names from `required` absent in the header, in request order.
  std::vector<std::string> missing(const std::vector<std::string>& required) const {
    std::vector<std::string> out;
    for (const auto& c : required)
      if (!index_.count(c)) out.push_back(c);
    return out;
  }

  // Next non-blank row; `line_number` is 1-based in the source file.
  bool next(std::vector<std::string>& fields, std::size_t& line_number) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      if (is_blank(line)) continue;
      fields = split_line(line, delimiter_);
      line_number = line_;
      return true;
    }
    return false;
  }

 private:
  static bool is_blank(const std::string& line) {
    return line.find_first_not_of(" \t\r") == std::string::npos;
  }

  std::istream& in_;
  char delimiter_;
  std::size_t line_ = 0;
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

}  // namespace conjointnet::csv
