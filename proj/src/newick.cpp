#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "phonosig/error.hpp"
#include "phonosig/format.hpp"
#include "phonosig/tree.hpp"

namespace phonosig {
namespace {

class NewickParser {
 public:
  NewickParser(std::string_view text, const NewickOptions& options)
      : text_(text), options_(options) {}

  PhyloTree parse() {
    skip_space();
    if (pos_ >= text_.size() || peek() == ';') throw error("empty tree");
    const NodeId root = parse_subtree(std::nullopt);
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != ';') throw error("unterminated tree (missing ';')");
    ++pos_;
    skip_space();
    if (pos_ != text_.size()) throw error("unexpected text after ';'");
    return PhyloTree(std::move(nodes_), root);
  }

 private:
  InputError error(const std::string& what) const {
    return InputError("newick: " + what + " at offset " + std::to_string(pos_));
  }

  // Whitespace and [bracketed comments] may appear between any tokens.
  void skip_space() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '[') {
        const auto close = text_.find(']', pos_);
        if (close == std::string_view::npos) throw error("unterminated comment");
        pos_ = close + 1;
      } else {
        break;
      }
    }
  }

  NodeId parse_subtree(std::optional<NodeId> parent) {
    const NodeId id = nodes_.size();
    nodes_.push_back(TreeNode{parent, {}, 0.0, {}});
    if (parent) nodes_[*parent].children.push_back(id);

    skip_space();
    if (peek() == '(') {
      ++pos_;
      while (true) {
        parse_subtree(id);
        skip_space();
        const char c = peek();
        if (c == ',') {
          ++pos_;
        } else if (c == ')') {
          ++pos_;
          break;
        } else {
          throw error(c == '\0' ? "unbalanced parentheses" : std::string("unexpected '") + c + "'");
        }
      }
    }
    skip_space();
    std::string label = parse_label();
    skip_space();
    std::optional<double> length;
    if (peek() == ':') {
      ++pos_;
      skip_space();
      length = parse_number();
    }
    if (parent) {
      if (!length) {
        if (!options_.default_length) throw error("missing branch length");
        length = options_.default_length;
      }
      if (*length < 0.0) throw error("negative branch length");
      nodes_[id].length = *length;
    }
    if (nodes_[id].children.empty()) {
      if (label.empty()) throw error("tip without a label");
      nodes_[id].label = std::move(label);
    }
    return id;
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  std::string parse_label() {
    std::string out;
    if (peek() == '\'') {
      ++pos_;
      while (true) {
        if (pos_ >= text_.size()) throw error("unterminated quoted label");
        const char c = text_[pos_++];
        if (c == '\'') {
          if (peek() == '\'') {
            out.push_back('\'');
            ++pos_;
          } else {
            break;
          }
        } else {
          out.push_back(c);
        }
      }
      return out;
    }
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c)) || std::string_view("()[]':;,").find(c) != std::string_view::npos)
        break;
      out.push_back(c);
      ++pos_;
    }
    return out;
  }

  double parse_number() {
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr == first) throw error("malformed branch length");
    pos_ += static_cast<std::size_t>(ptr - first);
    return v;
  }

  std::string_view text_;
  const NewickOptions& options_;
  std::size_t pos_ = 0;
  std::vector<TreeNode> nodes_;
};

bool needs_quotes(std::string_view label) {
  for (char c : label) {
    if (std::isspace(static_cast<unsigned char>(c)) || std::string_view("()[]':;,").find(c) != std::string_view::npos)
      return true;
  }
  return false;
}

void write_label(std::string& out, std::string_view label) {
  if (!needs_quotes(label)) {
    out += label;
    return;
  }
  out.push_back('\'');
  for (char c : label) {
    if (c == '\'') out.push_back('\'');
    out.push_back(c);
  }
  out.push_back('\'');
}

void write_length(std::string& out, double v) {
  out.push_back(':');
  out += format_shortest(v);
}

}  // namespace

PhyloTree parse_newick(std::string_view text, const NewickOptions& options) {
  return NewickParser(text, options).parse();
}

PhyloTree read_newick_file(const std::string& path, const NewickOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open tree file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_newick(ss.str(), options);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::string write_newick(const PhyloTree& tree) {
  std::string out;
  // Explicit stack: (node, next child index).
  std::vector<std::pair<NodeId, std::size_t>> stack{{tree.root(), 0}};
  while (!stack.empty()) {
    auto& [id, next] = stack.back();
    const auto& node = tree.node(id);
    if (node.is_tip()) {
      write_label(out, node.label);
      if (id != tree.root()) write_length(out, node.length);
      stack.pop_back();
      continue;
    }
    if (next == 0) out.push_back('(');
    if (next < node.children.size()) {
      if (next > 0) out.push_back(',');
      const NodeId child = node.children[next++];
      stack.emplace_back(child, 0);
      continue;
    }
    out.push_back(')');
    if (id != tree.root()) write_length(out, node.length);
    stack.pop_back();
  }
  out.push_back(';');
  return out;
}

}  // namespace phonosig
