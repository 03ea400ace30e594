#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "retihemo/bohf.hpp"

namespace retihemo {

/// Per-subject clinical metadata from the labels file.
struct PatientInfo {
  std::string subject_id;
  int label = 0;  // -1 healthy, +1 glaucomatous
  double age = 0.0;
  std::string sex;  // "M" or "F"

  bool male() const { return sex == "M" || sex == "m"; }
};

/// Parses `subject_id,label,age,sex` CSV with a header line. Labels may be
/// -1/+1 or H/G (healthy/glaucoma).
std::vector<PatientInfo> parse_labels(const std::string& csv);
std::string labels_csv(std::span<const PatientInfo> patients);

struct MeasurementRecord {
  std::string subject_id;
  GraphElementKind kind = GraphElementKind::Segment;
  double dp_mmhg = 0.0;
  double v_cm_s = 0.0;
  double r_cm = 0.0;
  double q_ul_min = 0.0;
  double age = 0.0;
  std::string sex;
  int label = 0;
};

/// One record per feature element; dP is measured against the inlet pressure.
std::vector<MeasurementRecord> measurement_records(const FeatureSet& features, const PatientInfo& patient,
                                                   double p0_mmhg);

std::string records_tsv(std::span<const MeasurementRecord> records);
std::vector<MeasurementRecord> parse_records_tsv(const std::string& text);

/// Q = a * exp(b * r), fitted by least squares on log Q.
struct ExpFit {
  double a = 0.0;
  double b = 0.0;
  std::size_t n = 0;

  double operator()(double r) const;
};

ExpFit fit_exponential(std::span<const double> r, std::span<const double> q);

/// Spearman rank correlation (midranks for ties).
double spearman(std::span<const double> x, std::span<const double> y);

struct RadiusFlowResult {
  double spearman_rho = 0.0;
  std::size_t n_segments = 0;
  std::map<std::string, ExpFit> per_subject;
  std::map<int, ExpFit> per_group;  // keyed by label
};

RadiusFlowResult radius_flow_correlation(std::span<const MeasurementRecord> records);

/// Tab-separated plot data: segment samples and fitted-curve samples.
std::string radius_flow_plot_data(std::span<const MeasurementRecord> records, const RadiusFlowResult& result,
                                  int curve_samples = 50);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
};

MeanStd mean_std(std::span<const double> values);

/// Per-patient statistics (number of segments, age, males).
struct PatientStats {
  std::size_t n = 0;
  MeanStd segments;
  MeanStd age;
  std::size_t males = 0;
};

/// Per-measurement statistics.
struct MeasurementStats {
  std::size_t n = 0;
  MeanStd dp_mmhg;
  MeanStd v_cm_s;
  MeanStd r_cm;
  MeanStd age;
  std::size_t males = 0;
};

/// Throw EmptyGroup on empty input.
PatientStats patient_stats(std::span<const MeasurementRecord> records, std::span<const PatientInfo> patients);
MeasurementStats measurement_stats(std::span<const MeasurementRecord> records);

struct CohortSummary {
  PatientStats patients_all, patients_healthy, patients_glaucoma;
  MeasurementStats measurements_all, measurements_healthy, measurements_glaucoma;
};

CohortSummary cohort_summary(std::span<const MeasurementRecord> records, std::span<const PatientInfo> patients);

nlohmann::json to_json(const CohortSummary& summary);
nlohmann::json to_json(const RadiusFlowResult& result);

}  // namespace retihemo
