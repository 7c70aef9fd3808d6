#include "cocoa/kvtree.hpp"

#include <sstream>

#include "cocoa/errors.hpp"

namespace cocoa {

const KvNode* KvNode::find(std::string_view key) const {
  for (const auto& [k, node] : children)
    if (k == key) return &node;
  return nullptr;
}

const std::string& KvNode::get(std::string_view key) const {
  const KvNode* node = find(key);
  if (!node) throw input_error("kvtree: missing key '" + std::string(key) + "'");
  if (!node->is_leaf())
    throw input_error("kvtree: key '" + std::string(key) + "' is not a leaf");
  return node->value;
}

std::string KvNode::get_or(std::string_view key, std::string fallback) const {
  const KvNode* node = find(key);
  return node && node->is_leaf() ? node->value : std::move(fallback);
}

std::vector<const KvNode*> KvNode::all(std::string_view key) const {
  std::vector<const KvNode*> out;
  for (const auto& [k, node] : children)
    if (k == key) out.push_back(&node);
  return out;
}

void KvNode::set(std::string key, std::string value) {
  KvNode leaf;
  leaf.value = std::move(value);
  children.emplace_back(std::move(key), std::move(leaf));
}

KvNode& KvNode::add_child(std::string key) {
  children.emplace_back(std::move(key), KvNode{});
  return children.back().second;
}

namespace {

struct Line {
  std::size_t indent;
  std::string key;
  std::string value;
  bool has_value;
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (end == text.size() && raw.empty()) break;

    std::size_t indent = 0;
    while (indent < raw.size() && raw[indent] == ' ') ++indent;
    std::string_view body = raw.substr(indent);
    if (body.empty() || body[0] == '#') continue;
    if (indent % 2 != 0)
      throw input_error("kvtree: odd indentation at line " + std::to_string(lineno));
    std::size_t colon = body.find(':');
    if (colon == std::string_view::npos)
      throw input_error("kvtree: missing ':' at line " + std::to_string(lineno));
    Line line;
    line.indent = indent / 2;
    line.key = std::string(body.substr(0, colon));
    std::string_view rest = body.substr(colon + 1);
    while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
    while (!rest.empty() && (rest.back() == ' ' || rest.back() == '\r')) rest.remove_suffix(1);
    line.value = std::string(rest);
    line.has_value = !line.value.empty();
    if (line.key.empty())
      throw input_error("kvtree: empty key at line " + std::to_string(lineno));
    lines.push_back(std::move(line));
  }
  return lines;
}

std::size_t parse_block(const std::vector<Line>& lines, std::size_t i, std::size_t depth,
                        KvNode& node) {
  while (i < lines.size() && lines[i].indent == depth) {
    const Line& line = lines[i];
    if (line.has_value) {
      node.set(line.key, line.value);
      ++i;
    } else {
      KvNode& child = node.add_child(line.key);
      ++i;
      if (i < lines.size() && lines[i].indent > depth)
        i = parse_block(lines, i, depth + 1, child);
    }
    if (i < lines.size() && lines[i].indent > depth)
      throw input_error("kvtree: unexpected indentation increase");
  }
  return i;
}

void serialize_node(const KvNode& node, std::size_t depth, std::ostringstream& os) {
  std::string pad(depth * 2, ' ');
  for (const auto& [key, child] : node.children) {
    if (child.is_leaf()) {
      os << pad << key << ": " << child.value << "\n";
    } else {
      os << pad << key << ":\n";
      serialize_node(child, depth + 1, os);
    }
  }
}

}  // namespace

KvNode kv_parse(std::string_view text) {
  KvNode root;
  auto lines = split_lines(text);
  std::size_t consumed = parse_block(lines, 0, 0, root);
  if (consumed != lines.size()) throw input_error("kvtree: malformed indentation");
  return root;
}

std::string kv_serialize(const KvNode& root) {
  std::ostringstream os;
  serialize_node(root, 0, os);
  return os.str();
}

}  // namespace cocoa
