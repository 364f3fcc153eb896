#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "clusteriv/errors.hpp"

namespace clusteriv {

/// Dense 0..G-1 cluster indexing over N units.
///
/// Group ids are assigned by first appearance of each label, so the mapping
/// is a deterministic function of the input order. Singleton clusters are
/// legal.
class ClusterIndex {
 public:
  ClusterIndex() = default;

  static ClusterIndex from_labels(const std::vector<std::string>& labels) {
    ClusterIndex idx;
    std::unordered_map<std::string, int> seen;
    idx.group_of_.reserve(labels.size());
    for (const auto& lab : labels) {
      auto it = seen.find(lab);
      int g;
      if (it == seen.end()) {
        g = static_cast<int>(idx.labels_.size());
        seen.emplace(lab, g);
        idx.labels_.push_back(lab);
        idx.members_.emplace_back();
      } else {
        g = it->second;
      }
      idx.group_of_.push_back(g);
      idx.members_[g].push_back(static_cast<int>(idx.group_of_.size()) - 1);
    }
    return idx;
  }

  static ClusterIndex from_labels(const std::vector<long long>& labels) {
    std::vector<std::string> s;
    s.reserve(labels.size());
    for (auto v : labels) s.push_back(std::to_string(v));
    return from_labels(s);
  }

  int n_units() const { return static_cast<int>(group_of_.size()); }
  int n_groups() const { return static_cast<int>(members_.size()); }
  int group_of(int unit) const { return group_of_[unit]; }
  int size(int g) const { return static_cast<int>(members_[g].size()); }
  const std::vector<int>& members(int g) const { return members_[g]; }
  const std::string& label(int g) const { return labels_[g]; }

 private:
  std::vector<std::string> labels_;       // group id -> original label
  std::vector<int> group_of_;             // unit -> group id
  std::vector<std::vector<int>> members_; // group id -> unit indices
};

}  // namespace clusteriv
