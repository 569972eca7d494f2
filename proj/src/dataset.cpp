#include "swdecay/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "swdecay/errors.hpp"

namespace swdecay {

std::vector<int> TrialDataset::cluster_sizes() const {
  std::vector<int> sizes;
  sizes.reserve(clusters.size());
  for (const auto& c : clusters) sizes.push_back(c.size());
  return sizes;
}

int TrialDataset::max_cluster_size() const {
  int m = 0;
  for (const auto& c : clusters) m = std::max(m, c.size());
  return m;
}

long long TrialDataset::total_observations() const {
  long long total = 0;
  for (const auto& c : clusters) total += static_cast<long long>(c.size()) * periods;
  return total;
}

TrialDataset dataset_from_records(const std::vector<DatasetRecord>& records) {
  if (records.empty()) throw ValidationError("dataset has no records");

  int periods = 0;
  for (const auto& rec : records) {
    if (rec.period < 1) {
      throw ValidationError("period indices must be >= 1 (cluster " + rec.cluster +
                            ", individual " + rec.individual + ")");
    }
    periods = std::max(periods, rec.period);
  }

  TrialDataset ds;
  ds.periods = periods;

  // First-appearance order for clusters and individuals keeps write/parse
  // round trips exact.
  std::map<std::string, int> cluster_index;
  std::vector<std::map<std::string, int>> individual_index;
  std::vector<std::vector<std::vector<bool>>> seen;  // cluster -> ind -> period
  std::vector<std::vector<int>> treatment_seen;      // cluster -> period, -1 unset

  for (const auto& rec : records) {
    if (rec.treatment != 0 && rec.treatment != 1) {
      throw ValidationError("treatment must be 0 or 1 (cluster " + rec.cluster + ")");
    }
    auto [cit, cinserted] = cluster_index.try_emplace(
        rec.cluster, static_cast<int>(ds.clusters.size()));
    if (cinserted) {
      ds.clusters.push_back(ClusterData{rec.cluster,
                                        Eigen::VectorXi::Zero(periods),
                                        {}});
      individual_index.emplace_back();
      seen.emplace_back();
      treatment_seen.emplace_back(periods, -1);
    }
    const int ci = cit->second;
    ClusterData& cluster = ds.clusters[ci];

    int& tcell = treatment_seen[ci][rec.period - 1];
    if (tcell == -1) {
      tcell = rec.treatment;
      cluster.treatment(rec.period - 1) = rec.treatment;
    } else if (tcell != rec.treatment) {
      std::ostringstream msg;
      msg << "inconsistent treatment within cluster " << rec.cluster << ", period "
          << rec.period;
      throw ValidationError(msg.str());
    }

    auto [iit, iinserted] = individual_index[ci].try_emplace(
        rec.individual, static_cast<int>(cluster.individuals.size()));
    if (iinserted) {
      cluster.individuals.push_back(
          IndividualSeries{rec.individual, Eigen::VectorXd::Zero(periods)});
      seen[ci].emplace_back(periods, false);
    }
    const int ii = iit->second;
    if (seen[ci][ii][rec.period - 1]) {
      std::ostringstream msg;
      msg << "duplicate outcome for cluster " << rec.cluster << ", individual "
          << rec.individual << ", period " << rec.period;
      throw ValidationError(msg.str());
    }
    seen[ci][ii][rec.period - 1] = true;
    cluster.individuals[ii].outcomes(rec.period - 1) = rec.outcome;
  }

  // Closed cohort: every individual observed in every period.
  for (std::size_t ci = 0; ci < ds.clusters.size(); ++ci) {
    const ClusterData& cluster = ds.clusters[ci];
    for (std::size_t ii = 0; ii < cluster.individuals.size(); ++ii) {
      for (int t = 0; t < periods; ++t) {
        if (!seen[ci][ii][t]) {
          std::ostringstream msg;
          msg << "individual " << cluster.individuals[ii].id << " in cluster "
              << cluster.id << " is missing period " << t + 1;
          throw ValidationError(msg.str());
        }
      }
    }
    for (int t = 0; t < periods; ++t) {
      if (treatment_seen[ci][t] == -1) {
        std::ostringstream msg;
        msg << "cluster " << cluster.id << " has no records for period " << t + 1;
        throw ValidationError(msg.str());
      }
    }
    bool treated = false;
    for (int t = 0; t < periods; ++t) {
      if (treated && cluster.treatment(t) == 0) {
        std::ostringstream msg;
        msg << "cluster " << cluster.id
            << " violates staggered rollout: treatment path is not zeros "
               "followed by ones";
        throw ValidationError(msg.str());
      }
      treated = treated || cluster.treatment(t) == 1;
    }
  }
  return ds;
}

TrialDataset parse_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty dataset file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "cluster,individual,period,treatment,outcome") {
    throw ValidationError(
        "bad header in " + path +
        ": expected `cluster,individual,period,treatment,outcome`, got `" + line + "`");
  }

  std::vector<DatasetRecord> records;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5) {
      std::ostringstream msg;
      msg << path << ":" << row << ": expected 5 comma-separated fields, got "
          << fields.size();
      throw ValidationError(msg.str());
    }
    DatasetRecord rec;
    rec.cluster = fields[0];
    rec.individual = fields[1];
    try {
      std::size_t pos = 0;
      rec.period = std::stoi(fields[2], &pos);
      if (pos != fields[2].size()) throw std::invalid_argument("trailing chars");
      rec.treatment = std::stoi(fields[3], &pos);
      if (pos != fields[3].size()) throw std::invalid_argument("trailing chars");
      rec.outcome = std::stod(fields[4], &pos);
      if (pos != fields[4].size()) throw std::invalid_argument("trailing chars");
    } catch (const std::exception&) {
      std::ostringstream msg;
      msg << path << ":" << row << ": malformed numeric field";
      throw ValidationError(msg.str());
    }
    records.push_back(std::move(rec));
  }

  try {
    return dataset_from_records(records);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_dataset_csv(const TrialDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write dataset file: " + path);
  out << "cluster,individual,period,treatment,outcome\n";
  char buf[64];
  for (const auto& cluster : dataset.clusters) {
    for (const auto& individual : cluster.individuals) {
      for (int t = 0; t < dataset.periods; ++t) {
        std::snprintf(buf, sizeof(buf), "%.17g", individual.outcomes(t));
        out << cluster.id << ',' << individual.id << ',' << t + 1 << ','
            << cluster.treatment(t) << ',' << buf << '\n';
      }
    }
  }
}

}  // namespace swdecay
