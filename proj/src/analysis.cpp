#include "retihemo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "retihemo/error.hpp"
#include "retihemo/io.hpp"

namespace retihemo {

using nlohmann::json;

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

int parse_label(const std::string& raw) {
  std::string s = trim(raw);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "-1" || s == "h" || s == "healthy" || s == "control") return -1;
  if (s == "1" || s == "+1" || s == "g" || s == "glaucoma" || s == "glaucomatous") return 1;
  throw Error(ErrorCode::ParseError, "unknown label '" + raw + "'");
}

GraphElementKind kind_from(const std::string& s) {
  if (auto k = graph_element_kind_from_string(s)) return *k;
  throw Error(ErrorCode::ParseError, "unknown element kind " + s);
}

std::vector<double> midranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return rank;
}

json mean_std_json(const MeanStd& m) { return {{"mean", round_sig(m.mean)}, {"std", round_sig(m.std)}}; }

json patient_json(const PatientStats& s) {
  return {{"n", s.n}, {"segments", mean_std_json(s.segments)}, {"age", mean_std_json(s.age)}, {"males", s.males}};
}

json measurement_json(const MeasurementStats& s) {
  return {{"n", s.n},
          {"dP_mmHg", mean_std_json(s.dp_mmhg)},
          {"v_cm_s", mean_std_json(s.v_cm_s)},
          {"r_cm", mean_std_json(s.r_cm)},
          {"age", mean_std_json(s.age)},
          {"males", s.males}};
}

json fit_json(const ExpFit& f) { return {{"a", round_sig(f.a)}, {"b", round_sig(f.b)}, {"n", f.n}}; }

}  // namespace

std::vector<PatientInfo> parse_labels(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::vector<PatientInfo> out;
  bool header = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      if (line.rfind("subject", 0) == 0) continue;
    }
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(trim(cell));
    if (cols.size() < 2) throw Error(ErrorCode::ParseError, "labels row needs at least subject_id,label");
    PatientInfo p;
    p.subject_id = cols[0];
    p.label = parse_label(cols[1]);
    if (cols.size() > 2 && !cols[2].empty()) p.age = std::stod(cols[2]);
    if (cols.size() > 3) p.sex = cols[3];
    out.push_back(std::move(p));
  }
  return out;
}

std::string labels_csv(std::span<const PatientInfo> patients) {
  std::ostringstream out;
  out << "subject_id,label,age,sex\n";
  for (const auto& p : patients)
    out << p.subject_id << ',' << p.label << ',' << format_number(p.age) << ',' << p.sex << '\n';
  return out.str();
}

std::vector<MeasurementRecord> measurement_records(const FeatureSet& features, const PatientInfo& patient,
                                                   double p0_mmhg) {
  std::vector<MeasurementRecord> out;
  out.reserve(features.elements.size());
  for (const auto& e : features.elements) {
    MeasurementRecord r;
    r.subject_id = patient.subject_id;
    r.kind = e.kind;
    r.q_ul_min = e.values[0];
    r.dp_mmhg = std::max(0.0, p0_mmhg - e.values[1]);
    r.v_cm_s = e.values[2];
    r.r_cm = e.radius_cm;
    r.age = patient.age;
    r.sex = patient.sex;
    r.label = patient.label;
    out.push_back(r);
  }
  return out;
}

std::string records_tsv(std::span<const MeasurementRecord> records) {
  std::ostringstream out;
  out << "subject\tkind\tlabel\tage\tsex\tdP_mmHg\tv_cm_s\tr_cm\tQ_ul_min\n";
  for (const auto& r : records) {
    out << r.subject_id << '\t' << to_string(r.kind) << '\t' << r.label << '\t' << format_number(r.age) << '\t'
        << (r.sex.empty() ? "-" : r.sex) << '\t' << format_number(r.dp_mmhg) << '\t' << format_number(r.v_cm_s)
        << '\t' << format_number(r.r_cm) << '\t' << format_number(r.q_ul_min) << '\n';
  }
  return out.str();
}

std::vector<MeasurementRecord> parse_records_tsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<MeasurementRecord> out;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    MeasurementRecord r;
    std::string kind;
    if (!(ss >> r.subject_id >> kind >> r.label >> r.age >> r.sex >> r.dp_mmhg >> r.v_cm_s >> r.r_cm >> r.q_ul_min))
      throw Error(ErrorCode::ParseError, "malformed record row: " + line);
    if (r.sex == "-") r.sex.clear();
    r.kind = kind_from(kind);
    out.push_back(r);
  }
  return out;
}

double ExpFit::operator()(double r) const { return a * std::exp(b * r); }

ExpFit fit_exponential(std::span<const double> r, std::span<const double> q) {
  if (r.size() != q.size() || r.size() < 2) throw Error(ErrorCode::InsufficientData, "need at least two samples");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!(q[i] > 0)) throw Error(ErrorCode::InvalidArgument, "exponential fit needs positive flows");
    const double y = std::log(q[i]);
    sx += r[i];
    sy += y;
    sxx += r[i] * r[i];
    sxy += r[i] * y;
  }
  const double denom = n * sxx - sx * sx;
  if (!(std::abs(denom) > 0)) throw Error(ErrorCode::UndefinedCorrelation, "radii are constant");
  ExpFit f;
  f.b = (n * sxy - sx * sy) / denom;
  f.a = std::exp((sy - f.b * sx) / n);
  f.n = r.size();
  return f;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3) throw Error(ErrorCode::InsufficientData, "need at least three pairs");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) throw Error(ErrorCode::UndefinedCorrelation, "constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

RadiusFlowResult radius_flow_correlation(std::span<const MeasurementRecord> records) {
  std::vector<double> r, q;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_subject;
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_group;
  for (const auto& rec : records) {
    if (rec.kind != GraphElementKind::Segment) continue;
    r.push_back(rec.r_cm);
    q.push_back(rec.q_ul_min);
    by_subject[rec.subject_id].first.push_back(rec.r_cm);
    by_subject[rec.subject_id].second.push_back(rec.q_ul_min);
    by_group[rec.label].first.push_back(rec.r_cm);
    by_group[rec.label].second.push_back(rec.q_ul_min);
  }
  if (r.size() < 3) throw Error(ErrorCode::InsufficientData, "need at least three segment records");
  RadiusFlowResult out;
  out.n_segments = r.size();
  out.spearman_rho = spearman(r, q);
  auto try_fit = [](const auto& samples, ExpFit& fit) {
    try {
      fit = fit_exponential(samples.first, samples.second);
      return true;
    } catch (const Error&) {
      return false;
    }
  };
  for (const auto& [id, samples] : by_subject) {
    ExpFit f;
    if (try_fit(samples, f)) out.per_subject[id] = f;
  }
  for (const auto& [label, samples] : by_group) {
    ExpFit f;
    if (try_fit(samples, f)) out.per_group[label] = f;
  }
  return out;
}

std::string radius_flow_plot_data(std::span<const MeasurementRecord> records, const RadiusFlowResult& result,
                                  int curve_samples) {
  std::ostringstream out;
  out << "series\tsubject\tlabel\tr_cm\tQ_ul_min\n";
  double rmin = std::numeric_limits<double>::infinity(), rmax = -rmin;
  for (const auto& rec : records) {
    if (rec.kind != GraphElementKind::Segment) continue;
    rmin = std::min(rmin, rec.r_cm);
    rmax = std::max(rmax, rec.r_cm);
    out << "sample\t" << rec.subject_id << '\t' << rec.label << '\t' << format_number(rec.r_cm) << '\t'
        << format_number(rec.q_ul_min) << '\n';
  }
  if (!(rmax >= rmin)) return out.str();
  auto emit_curve = [&](const std::string& series, const std::string& subject, int label, const ExpFit& f) {
    for (int i = 0; i < curve_samples; ++i) {
      const double r = curve_samples > 1 ? rmin + (rmax - rmin) * i / (curve_samples - 1) : rmin;
      out << series << '\t' << subject << '\t' << label << '\t' << format_number(r) << '\t' << format_number(f(r))
          << '\n';
    }
  };
  std::map<std::string, int> subject_label;
  for (const auto& rec : records) subject_label[rec.subject_id] = rec.label;
  for (const auto& [id, f] : result.per_subject) emit_curve("subject_fit", id, subject_label[id], f);
  for (const auto& [label, f] : result.per_group) emit_curve("group_fit", "-", label, f);
  return out.str();
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyGroup, "no values");
  MeanStd m;
  const double n = static_cast<double>(values.size());
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / (n - 1));
  }
  return m;
}

PatientStats patient_stats(std::span<const MeasurementRecord> records, std::span<const PatientInfo> patients) {
  if (patients.empty()) throw Error(ErrorCode::EmptyGroup, "no patients in group");
  std::map<std::string, double> segments;
  for (const auto& p : patients) segments[p.subject_id] = 0;
  for (const auto& r : records)
    if (r.kind == GraphElementKind::Segment && segments.count(r.subject_id)) segments[r.subject_id] += 1;
  std::vector<double> nos, ages;
  PatientStats s;
  for (const auto& p : patients) {
    nos.push_back(segments[p.subject_id]);
    ages.push_back(p.age);
    s.males += p.male();
  }
  s.n = patients.size();
  s.segments = mean_std(nos);
  s.age = mean_std(ages);
  return s;
}

MeasurementStats measurement_stats(std::span<const MeasurementRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptyGroup, "no measurements in group");
  std::vector<double> dp, v, r, age;
  MeasurementStats s;
  for (const auto& rec : records) {
    dp.push_back(rec.dp_mmhg);
    v.push_back(rec.v_cm_s);
    r.push_back(rec.r_cm);
    age.push_back(rec.age);
    s.males += rec.sex == "M" || rec.sex == "m";
  }
  s.n = records.size();
  s.dp_mmhg = mean_std(dp);
  s.v_cm_s = mean_std(v);
  s.r_cm = mean_std(r);
  s.age = mean_std(age);
  return s;
}

CohortSummary cohort_summary(std::span<const MeasurementRecord> records, std::span<const PatientInfo> patients) {
  auto patients_with = [&](int label) {
    std::vector<PatientInfo> out;
    for (const auto& p : patients)
      if (label == 0 || p.label == label) out.push_back(p);
    return out;
  };
  auto records_with = [&](int label) {
    std::vector<MeasurementRecord> out;
    for (const auto& r : records)
      if (label == 0 || r.label == label) out.push_back(r);
    return out;
  };
  CohortSummary s;
  s.patients_all = patient_stats(records, patients_with(0));
  s.patients_healthy = patient_stats(records, patients_with(-1));
  s.patients_glaucoma = patient_stats(records, patients_with(1));
  s.measurements_all = measurement_stats(records_with(0));
  s.measurements_healthy = measurement_stats(records_with(-1));
  s.measurements_glaucoma = measurement_stats(records_with(1));
  return s;
}

json to_json(const CohortSummary& s) {
  return {{"per_patient",
           {{"all", patient_json(s.patients_all)},
            {"healthy", patient_json(s.patients_healthy)},
            {"glaucomatous", patient_json(s.patients_glaucoma)}}},
          {"per_measurement",
           {{"all", measurement_json(s.measurements_all)},
            {"healthy", measurement_json(s.measurements_healthy)},
            {"glaucomatous", measurement_json(s.measurements_glaucoma)}}}};
}

json to_json(const RadiusFlowResult& result) {
  json subjects = json::object();
  for (const auto& [id, f] : result.per_subject) subjects[id] = fit_json(f);
  json groups = json::object();
  for (const auto& [label, f] : result.per_group) groups[label < 0 ? "healthy" : "glaucomatous"] = fit_json(f);
  return {{"spearman_rho", round_sig(result.spearman_rho)},
          {"n_segments", result.n_segments},
          {"per_subject", subjects},
          {"per_group", groups}};
}

}  // namespace retihemo
