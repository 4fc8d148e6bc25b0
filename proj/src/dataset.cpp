#include "retaug/dataset.hpp"

#include <fstream>
#include <stdexcept>

#include "retaug/vectors.hpp"  // FormatError

namespace retaug {

int LabeledDataset::intern_label(std::string_view name) {
  auto it = label_ids.find(std::string(name));
  if (it != label_ids.end()) return it->second;
  int id = int(label_names.size());
  label_names.emplace_back(name);
  label_ids.emplace(std::string(name), id);
  return id;
}

void LabeledDataset::add(std::string_view label_name, std::string text) {
  examples.push_back(LabeledExample{std::move(text), intern_label(label_name)});
}

void LabeledDataset::add_id(int label, std::string text) {
  if (label < 0 || label >= num_classes())
    throw std::invalid_argument("add_id: unknown label id " + std::to_string(label));
  examples.push_back(LabeledExample{std::move(text), label});
}

std::vector<std::uint64_t> LabeledDataset::label_counts() const {
  std::vector<std::uint64_t> counts(label_names.size(), 0);
  for (const auto& e : examples) ++counts[std::size_t(e.label)];
  return counts;
}

std::vector<std::vector<std::size_t>> LabeledDataset::by_label() const {
  std::vector<std::vector<std::size_t>> out(label_names.size());
  for (std::size_t i = 0; i < examples.size(); ++i)
    out[std::size_t(examples[i].label)].push_back(i);
  return out;
}

void LabeledDataset::validate() const {
  for (const auto& e : examples)
    if (e.label < 0 || e.label >= num_classes())
      throw std::logic_error("dataset: label id out of range");
  if (label_ids.size() != label_names.size())
    throw std::logic_error("dataset: label vocabulary out of sync");
}

LabeledDataset LabeledDataset::load_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset file: " + path);
  LabeledDataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected label<TAB>text");
    ds.add(std::string_view(line).substr(0, tab), line.substr(tab + 1));
  }
  return ds;
}

void LabeledDataset::save_tsv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (const auto& e : examples)
    out << label_names[std::size_t(e.label)] << '\t' << e.text << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledDataset out;
  out.label_names = label_names;
  out.label_ids = label_ids;
  out.examples.reserve(indices.size());
  for (auto i : indices) out.examples.push_back(examples[i]);
  return out;
}

}  // namespace retaug
