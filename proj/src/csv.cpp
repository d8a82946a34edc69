#include "mstrack/csv.hpp"

#include <cstdio>

namespace mstrack {

namespace {

const char* const kAxes[] = {"x", "y", "z"};

void append_state(std::vector<std::string>& cols, const std::string& prefix, int d) {
  for (int i = 0; i < d; ++i) cols.push_back(prefix + "p" + kAxes[i]);
  for (int i = 0; i < d; ++i) cols.push_back(prefix + "v" + kAxes[i]);
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << fields[i];
  }
  out << '\n';
}

void append_values(std::vector<std::string>& fields, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) fields.push_back(format_number(v(i)));
}

}  // namespace

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::vector<std::string> episode_columns(int d, int sensors) {
  std::vector<std::string> cols{"t", "target_id"};
  append_state(cols, "true_", d);
  append_state(cols, "est_", d);
  cols.insert(cols.end(), {"pos_err_m", "vel_err_mps", "crb_ref"});
  for (int m = 0; m < sensors; ++m) {
    const std::string prefix = "s" + std::to_string(m) + "_";
    append_state(cols, prefix, d);
    for (int i = 0; i < d; ++i) cols.push_back(prefix + "u" + kAxes[i]);
  }
  return cols;
}

void write_episode_csv(std::ostream& out, const RunResult& run) {
  write_row(out, episode_columns(run.d, run.sensors));
  std::vector<std::string> fields;
  for (int t = 0; t < run.steps; ++t) {
    for (int n = 0; n < run.targets; ++n) {
      const TargetRow& row = run.target_row(t, n);
      fields = {std::to_string(t), std::to_string(n)};
      append_values(fields, row.truth);
      append_values(fields, row.estimate);
      fields.push_back(format_number(row.pos_err));
      fields.push_back(format_number(row.vel_err));
      fields.push_back(format_number(row.crb_ref));
      for (int m = 0; m < run.sensors; ++m) {
        const SensorRow& s = run.sensor_row(t, m);
        append_values(fields, s.state);
        append_values(fields, s.control);
      }
      write_row(out, fields);
    }
  }
}

std::vector<std::string> summary_columns() { return {"t", "target_id", "p10", "p50", "p90", "mean_crb"}; }

void write_summary_csv(std::ostream& out, const McSummary& summary) {
  write_row(out, summary_columns());
  for (const auto& row : summary.rows) {
    write_row(out, {std::to_string(row.t), std::to_string(row.target), format_number(row.p10), format_number(row.p50),
                    format_number(row.p90), format_number(row.mean_crb)});
  }
}

}  // namespace mstrack
