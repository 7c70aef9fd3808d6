#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cocoa {

/// Ordered key/value tree used by the dataset manifest and the CLI config
/// file. Text form: `key: value` for leaves, `key:` followed by a two-space
/// deeper block for subtrees. Duplicate keys are allowed and kept in order.
struct KvNode {
  std::string value;  // leaf payload; unused for subtree nodes
  std::vector<std::pair<std::string, KvNode>> children;

  bool is_leaf() const { return children.empty(); }

  const KvNode* find(std::string_view key) const;
  /// Leaf value for `key`; throws input_error if missing or not a leaf.
  const std::string& get(std::string_view key) const;
  std::string get_or(std::string_view key, std::string fallback) const;
  std::vector<const KvNode*> all(std::string_view key) const;

  void set(std::string key, std::string value);
  KvNode& add_child(std::string key);
};

KvNode kv_parse(std::string_view text);
std::string kv_serialize(const KvNode& root);

}  // namespace cocoa
