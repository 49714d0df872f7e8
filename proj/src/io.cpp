#include "sysid/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "sysid/errors.hpp"

namespace sysid::io {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  return out;
}

}  // namespace

json matrix_to_json(const Eigen::MatrixXd& mat) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < mat.rows(); ++i) {
    for (Eigen::Index j = 0; j < mat.cols(); ++j) arr.push_back(mat(i, j));
  }
  return arr;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows * cols) {
    throw DomainError("expected " + std::to_string(rows * cols) + " matrix entries");
  }
  Eigen::MatrixXd mat(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < cols; ++k) mat(i, k) = j.at(i * cols + k).get<double>();
  }
  return mat;
}

json vector_to_json(const Eigen::VectorXd& vec) {
  return json(std::vector<double>(vec.data(), vec.data() + vec.size()));
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json system_to_json(const BrunovskySystem& sys) {
  return json{{"n", sys.dims.n},
              {"m", sys.dims.m},
              {"p", sys.dims.p},
              {"char_coeffs", vector_to_json(sys.char_coeffs)},
              {"C", matrix_to_json(sys.c_matrix)},
              {"D", matrix_to_json(sys.d_matrix)}};
}

BrunovskySystem system_from_json(const json& j) {
  BrunovskySystem sys;
  sys.dims = SystemDims{j.at("n").get<int>(), j.at("m").get<int>(), j.at("p").get<int>()};
  sys.dims.validate();
  sys.char_coeffs = vector_from_json(j.at("char_coeffs"));
  sys.c_matrix = matrix_from_json(j.at("C"), sys.dims.p, sys.dims.state_dim());
  sys.d_matrix = matrix_from_json(j.at("D"), sys.dims.p, sys.dims.m);
  sys.validate();
  return sys;
}

json markov_to_json(const MarkovMatrix& theta) {
  return json{{"m", theta.input_dim()},
              {"p", theta.output_dim()},
              {"T", theta.truncation()},
              {"blocks", matrix_to_json(theta.matrix())}};
}

MarkovMatrix markov_from_json(const json& j) {
  const int m = j.at("m").get<int>();
  const int p = j.at("p").get<int>();
  const int T = j.at("T").get<int>();
  if (m < 1 || p < 1 || T < 1) throw DomainError("Markov JSON needs positive m, p, T");
  return MarkovMatrix(matrix_from_json(j.at("blocks"), p, static_cast<Eigen::Index>(m) * T), m);
}

json params_to_json(const RecoveredParams& params) {
  return json{{"a", vector_to_json(params.char_coeffs)},
              {"C", matrix_to_json(params.c_matrix)},
              {"D", matrix_to_json(params.d_matrix)},
              {"imag_residual", params.imag_residual},
              {"ls_residual", params.ls_residual}};
}

json params_to_json(const HankelDecomposition& hk) {
  return json{{"A", matrix_to_json(hk.a_hat)},
              {"B", matrix_to_json(hk.b_hat)},
              {"C", matrix_to_json(hk.c_hat)},
              {"D", matrix_to_json(hk.d_hat)},
              {"state_dim", hk.a_hat.rows()},
              {"aligned", hk.aligned}};
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DomainError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  auto out = open_out(path);
  out << 't';
  for (int i = 1; i <= traj.input_dim(); ++i) out << ",u_" << i;
  for (int i = 1; i <= traj.output_dim(); ++i) out << ",y_" << i;
  out << '\n';
  for (int k = 0; k < traj.length(); ++k) {
    out << k + 1;
    for (int i = 0; i < traj.input_dim(); ++i) out << ',' << format_double(traj.inputs(i, k));
    for (int i = 0; i < traj.output_dim(); ++i) out << ',' << format_double(traj.outputs(i, k));
    out << '\n';
  }
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DomainError(path.string() + ": empty file");
  const auto header = split(line, ',');
  int m = 0, p = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].rfind("u_", 0) == 0) ++m;
    else if (header[c].rfind("y_", 0) == 0) ++p;
  }
  if (header.empty() || header[0] != "t" || m == 0 || p == 0 ||
      static_cast<int>(header.size()) != 1 + m + p) {
    throw DomainError(path.string() + ": expected header t,u_1..u_m,y_1..y_p");
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (static_cast<int>(fields.size()) != 1 + m + p) {
      throw DomainError(path.string() + ": malformed row " + std::to_string(rows.size() + 1));
    }
    std::vector<double> r;
    for (std::size_t c = 1; c < fields.size(); ++c) r.push_back(std::stod(fields[c]));
    rows.push_back(std::move(r));
  }
  Trajectory traj;
  const auto N = static_cast<Eigen::Index>(rows.size());
  traj.inputs.resize(m, N);
  traj.outputs.resize(p, N);
  for (Eigen::Index k = 0; k < N; ++k) {
    for (int i = 0; i < m; ++i) traj.inputs(i, k) = rows[k][i];
    for (int i = 0; i < p; ++i) traj.outputs(i, k) = rows[k][m + i];
  }
  // Only the samples are stored; the input variance is estimated from them.
  traj.input_variances = N > 0 ? Eigen::VectorXd(traj.inputs.rowwise().squaredNorm() / N)
                               : Eigen::VectorXd::Ones(m);
  traj.meas_noise_variances = Eigen::VectorXd::Zero(p);
  return traj;
}

}  // namespace sysid::io
