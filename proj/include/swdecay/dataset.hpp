#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace swdecay {

// One closed-cohort individual: exactly one outcome per period 1..T.
struct IndividualSeries {
  std::string id;
  Eigen::VectorXd outcomes;  // length T, period order

  bool operator==(const IndividualSeries& other) const {
    return id == other.id && outcomes == other.outcomes;
  }
};

struct ClusterData {
  std::string id;
  Eigen::VectorXi treatment;  // length T, zeros then ones
  std::vector<IndividualSeries> individuals;

  int size() const { return static_cast<int>(individuals.size()); }

  bool operator==(const ClusterData& other) const {
    return id == other.id && treatment == other.treatment &&
           individuals == other.individuals;
  }
};

// Long-format closed-cohort trial data, grouped by cluster. Treatment is
// constant across individuals within a cluster-period and each cluster's
// treatment path is zeros followed by ones.
struct TrialDataset {
  int periods = 0;
  std::vector<ClusterData> clusters;

  int n_clusters() const { return static_cast<int>(clusters.size()); }
  std::vector<int> cluster_sizes() const;
  int max_cluster_size() const;
  long long total_observations() const;

  bool operator==(const TrialDataset& other) const {
    return periods == other.periods && clusters == other.clusters;
  }
};

// One record of the CSV wire format `cluster,individual,period,treatment,outcome`.
struct DatasetRecord {
  std::string cluster;
  std::string individual;
  int period = 0;  // 1-based
  int treatment = 0;
  double outcome = 0.0;
};

// Assembles and validates a dataset from records (any order). Errors name
// the offending cluster/individual/period.
TrialDataset dataset_from_records(const std::vector<DatasetRecord>& records);

// Parses the CSV wire format; errors name row numbers.
TrialDataset parse_dataset_csv(const std::string& path);

void write_dataset_csv(const TrialDataset& dataset, const std::string& path);

}  // namespace swdecay
