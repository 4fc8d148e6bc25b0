#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace retaug {

struct LabeledExample {
  std::string text;
  int label = 0;
};

// Classification examples plus a label vocabulary. Label ids are assigned in
// order of first appearance, which the TSV loader preserves.
struct LabeledDataset {
  std::vector<LabeledExample> examples;
  std::vector<std::string> label_names;            // id -> name
  std::unordered_map<std::string, int> label_ids;  // name -> id

  std::size_t size() const { return examples.size(); }
  int num_classes() const { return int(label_names.size()); }

  int intern_label(std::string_view name);
  void add(std::string_view label_name, std::string text);
  void add_id(int label, std::string text);  // label must already exist

  std::vector<std::uint64_t> label_counts() const;
  // Example indices per label, in dataset order.
  std::vector<std::vector<std::size_t>> by_label() const;

  void validate() const;

  // TSV: label<TAB>text, one example per line, UTF-8.
  static LabeledDataset load_tsv(const std::string& path);
  void save_tsv(const std::string& path) const;

  // Copy holding the given examples, same label vocabulary.
  LabeledDataset subset(const std::vector<std::size_t>& indices) const;
};

}  // namespace retaug
