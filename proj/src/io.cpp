#include "ebmnm/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ebmnm::io {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

namespace {

bool parse_double(std::string_view field, double& out) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
    field.remove_suffix(1);
  }
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::vector<double>> parse_csv(const std::string& text, const std::string& label) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    bool ok = true;
    for (auto field : split(line, ',')) {
      double v;
      if (!parse_double(field, v)) {
        ok = false;
        break;
      }
      row.push_back(v);
    }
    if (!ok) {
      if (rows.empty() && lineno == 1) continue;  // header
      throw Error(ErrorKind::MalformedInput,
                  label + ": line " + std::to_string(lineno) + " is not numeric");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix to_matrix(const std::vector<std::vector<double>>& rows, const std::string& label) {
  if (rows.empty()) return Matrix(0, 0);
  const std::size_t cols = rows.front().size();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) {
      throw Error(ErrorKind::DimensionMismatch, label + ": row " + std::to_string(i + 1) + " has " +
                                                    std::to_string(rows[i].size()) + " columns, expected " +
                                                    std::to_string(cols));
    }
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  }
  return m;
}

void append_row(std::string& out, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  for (Eigen::Index c = 0; c < row.size(); ++c) {
    if (c) out += ',';
    out += format_double(row(c));
  }
  out += '\n';
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, Eigen::Index R, const std::string& label) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != R) {
    throw Error(ErrorKind::MalformedInput, label + " must be an array of " + std::to_string(R) + " rows");
  }
  Matrix m(R, R);
  for (Eigen::Index i = 0; i < R; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != R) {
      throw Error(ErrorKind::MalformedInput, label + " rows must have " + std::to_string(R) + " entries");
    }
    for (Eigen::Index c = 0; c < R; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

Matrix read_matrix_csv(const fs::path& path) {
  return to_matrix(parse_csv(read_text(path), path.string()), path.string());
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) append_row(out, m.row(i));
  write_text(path, out);
}

Noise read_noise_csv(const fs::path& path, Eigen::Index n, Eigen::Index R) {
  const Matrix m = read_matrix_csv(path);
  if (m.cols() != R) {
    throw Error(ErrorKind::DimensionMismatch, path.string() + ": noise has " + std::to_string(m.cols()) +
                                                  " columns, expected " + std::to_string(R));
  }
  if (m.rows() == R) return SharedNoise{m};
  if (m.rows() == n * R) {
    PerObservationNoise per;
    per.V.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) per.V.push_back(m.block(j * R, 0, R, R));
    return per;
  }
  throw Error(ErrorKind::DimensionMismatch,
              path.string() + ": noise must have R or n*R rows, found " + std::to_string(m.rows()));
}

void write_noise_csv(const fs::path& path, const Noise& noise) {
  if (const auto* shared = std::get_if<SharedNoise>(&noise)) {
    write_matrix_csv(path, shared->V);
    return;
  }
  std::string out;
  for (const auto& V : std::get<PerObservationNoise>(noise).V) {
    for (Eigen::Index i = 0; i < V.rows(); ++i) append_row(out, V.row(i));
  }
  write_text(path, out);
}

Dataset read_dataset(const fs::path& x_path, const fs::path& noise_path) {
  const Matrix x = read_matrix_csv(x_path);
  if (x.rows() == 0) throw Error(ErrorKind::EmptyData, x_path.string() + " has no observations");
  return Dataset(x, read_noise_csv(noise_path, x.rows(), x.cols()));
}

json prior_to_json(const MixturePrior& m) {
  json j;
  j["K"] = m.K();
  j["R"] = m.dim();
  j["pi"] = std::vector<double>(m.pi().data(), m.pi().data() + m.K());
  j["s"] = std::vector<double>(m.s().data(), m.s().data() + m.K());
  j["U"] = json::array();
  for (const auto& U : m.U()) j["U"].push_back(matrix_to_json(U));
  j["constraints"] = json::array();
  for (const auto& c : m.constraints()) {
    json cj{{"kind", to_string(c.kind)}};
    if (c.kind == ConstraintKind::Scaled) cj["base"] = matrix_to_json(c.base);
    j["constraints"].push_back(std::move(cj));
  }
  return j;
}

MixturePrior prior_from_json(const json& j) {
  try {
    const auto K = j.at("K").get<Eigen::Index>();
    const auto& pi_j = j.at("pi");
    const auto& s_j = j.at("s");
    const auto& U_j = j.at("U");
    if (K < 1 || !pi_j.is_array() || !s_j.is_array() || !U_j.is_array() ||
        static_cast<Eigen::Index>(pi_j.size()) != K || static_cast<Eigen::Index>(s_j.size()) != K ||
        static_cast<Eigen::Index>(U_j.size()) != K) {
      throw Error(ErrorKind::MalformedInput, "prior JSON: pi, s and U must each have K entries");
    }
    const auto R = j.contains("R") ? j.at("R").get<Eigen::Index>()
                                   : static_cast<Eigen::Index>(U_j.at(0).size());
    Vector pi(K), s(K);
    std::vector<Matrix> U;
    for (Eigen::Index k = 0; k < K; ++k) {
      pi(k) = pi_j[static_cast<std::size_t>(k)].get<double>();
      s(k) = s_j[static_cast<std::size_t>(k)].get<double>();
      U.push_back(matrix_from_json(U_j[static_cast<std::size_t>(k)], R, "U_" + std::to_string(k)));
    }
    std::vector<ComponentConstraint> constraints(static_cast<std::size_t>(K));
    if (j.contains("constraints")) {
      const auto& c_j = j.at("constraints");
      if (!c_j.is_array() || static_cast<Eigen::Index>(c_j.size()) != K) {
        throw Error(ErrorKind::MalformedInput, "prior JSON: constraints must have K entries");
      }
      for (std::size_t k = 0; k < c_j.size(); ++k) {
        const auto kind = c_j[k].at("kind").get<std::string>();
        if (kind == "free") {
          constraints[k] = ComponentConstraint::free();
        } else if (kind == "rank1") {
          constraints[k] = ComponentConstraint::rank1();
        } else if (kind == "scaled") {
          constraints[k] = ComponentConstraint::scaled(matrix_from_json(c_j[k].at("base"), R, "base"));
        } else {
          throw Error(ErrorKind::MalformedInput, "prior JSON: unknown constraint kind '" + kind + "'");
        }
      }
    }
    return MixturePrior(std::move(pi), std::move(U), std::move(s), std::move(constraints));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedInput, std::string("prior JSON: ") + e.what());
  }
}

std::string serialize_prior(const MixturePrior& m) { return prior_to_json(m).dump(2) + "\n"; }

MixturePrior deserialize_prior(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedInput, std::string("prior JSON: ") + e.what());
  }
  return prior_from_json(j);
}

MixturePrior read_prior(const fs::path& path) { return deserialize_prior(read_text(path)); }

void write_prior(const fs::path& path, const MixturePrior& m) { write_text(path, serialize_prior(m)); }

void write_trace_csv(const fs::path& path, const FitTrace& trace) {
  std::string out = "phase,iteration,objective,seconds\n";
  auto emit = [&](const char* phase, const std::vector<TracePoint>& pts) {
    for (const auto& p : pts) {
      out += phase;
      out += ',' + std::to_string(p.iteration) + ',' + format_double(p.objective) + ',' +
             format_double(p.seconds) + '\n';
    }
  };
  emit("warmstart", trace.warmStart);
  emit("main", trace.perIteration);
  write_text(path, out);
}

void write_summary_csv(const fs::path& path, const Dataset& d, const PosteriorSummary& s) {
  std::string out = "observation,coordinate,x,posterior_mean,posterior_sd,lfsr\n";
  for (Eigen::Index j = 0; j < d.n(); ++j) {
    for (Eigen::Index r = 0; r < d.dim(); ++r) {
      out += std::to_string(j + 1) + ',' + std::to_string(r + 1) + ',' + format_double(d.x()(j, r)) + ',' +
             format_double(s.mean(j, r)) + ',' + format_double(s.sd(j, r)) + ',' +
             format_double(s.lfsr(j, r)) + '\n';
    }
  }
  write_text(path, out);
}

json report_to_json(const EvalReport& rep) {
  json j;
  j["klDivergence"] = rep.klDivergence;
  j["threshold"] = rep.threshold;
  j["empiricalFSR"] = rep.empiricalFsr;
  j["significantCount"] = rep.significantCount;
  j["powerFsrCurve"] = json::array();
  for (const auto& p : rep.powerFsrCurve) {
    j["powerFsrCurve"].push_back(
        {{"threshold", p.threshold}, {"power", p.power}, {"fsr", p.fsr}, {"significant", p.significant}});
  }
  return j;
}

void write_curve_csv(const fs::path& path, const std::vector<CurvePoint>& curve) {
  std::string out = "threshold,power,fsr,significant\n";
  for (const auto& p : curve) {
    out += format_double(p.threshold) + ',' + format_double(p.power) + ',' + format_double(p.fsr) + ',' +
           std::to_string(p.significant) + '\n';
  }
  write_text(path, out);
}

}  // namespace ebmnm::io
