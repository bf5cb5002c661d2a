#include "sgcap/corpus.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "sgcap/error.hpp"
#include "sgcap/text.hpp"

namespace sgcap {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw FormatError("corpus line " + std::to_string(line) + ": " + msg);
}

}  // namespace

std::vector<SentenceRecord> read_corpus(std::istream& in, bool heuristic_tags) {
  std::vector<SentenceRecord> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    auto cols = split(line, '\t');
    if (cols.size() == 2 && heuristic_tags) cols.insert(cols.begin() + 1, std::string());
    if (cols.size() != 3)
      fail(n, "expected 3 tab-separated columns (text, tokens, embedding), got " + std::to_string(cols.size()));

    SentenceRecord rec;
    rec.text = trim(cols[0]);
    if (rec.text.empty()) fail(n, "empty sentence text");
    rec.tokens = heuristic_tags ? heuristic_content_tokens(rec.text) : words(cols[1]);
    for (const auto& tok : words(cols[2])) {
      float v = 0.0f;
      const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size())
        fail(n, "cannot parse embedding value '" + tok + "'");
      if (!std::isfinite(v)) fail(n, "non-finite embedding value");
      rec.embedding.push_back(v);
    }
    if (rec.embedding.empty()) fail(n, "missing embedding");
    if (!out.empty() && rec.embedding.size() != out.front().embedding.size())
      fail(n, "embedding has " + std::to_string(rec.embedding.size()) + " values, expected " +
                  std::to_string(out.front().embedding.size()));
    out.push_back(std::move(rec));
  }
  if (out.empty()) throw FormatError("corpus is empty");
  return out;
}

std::vector<SentenceRecord> read_corpus(const std::filesystem::path& path, bool heuristic_tags) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open corpus " + path.string());
  return read_corpus(in, heuristic_tags);
}

void write_corpus(std::ostream& out, std::span<const SentenceRecord> records) {
  char buf[32];
  for (const auto& r : records) {
    out << r.text << '\t';
    for (std::size_t i = 0; i < r.tokens.size(); ++i) out << (i ? " " : "") << r.tokens[i];
    out << '\t';
    for (std::size_t i = 0; i < r.embedding.size(); ++i) {
      // Shortest representation that reads back to the same float.
      const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, r.embedding[i]);
      out << (i ? " " : "") << std::string_view(buf, static_cast<std::size_t>(p - buf));
    }
    out << '\n';
  }
}

std::vector<IdText> read_id_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<IdText> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw FormatError(path.string() + " line " + std::to_string(n) + ": expected 'id<TAB>text'");
    // Columns past the second (such as infer's score) are ignored.
    const auto end = line.find('\t', tab + 1);
    out.emplace_back(trim(line.substr(0, tab)), trim(line.substr(tab + 1, end == std::string::npos ? end : end - tab - 1)));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + " line " + std::to_string(n) + ": expected 'key = value'");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

}  // namespace sgcap
