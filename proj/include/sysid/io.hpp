#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "sysid/baseline.hpp"
#include "sysid/lti.hpp"
#include "sysid/recovery.hpp"

namespace sysid::io {

using nlohmann::json;

// Matrices are stored row-major as flat arrays.
json matrix_to_json(const Eigen::MatrixXd& mat);
Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols);
json vector_to_json(const Eigen::VectorXd& vec);
Eigen::VectorXd vector_from_json(const json& j);

json system_to_json(const BrunovskySystem& sys);
BrunovskySystem system_from_json(const json& j);

json markov_to_json(const MarkovMatrix& theta);
MarkovMatrix markov_from_json(const json& j);

json params_to_json(const RecoveredParams& params);
json params_to_json(const HankelDecomposition& hk);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);

// Header t,u_1..u_m,y_1..y_p; t is 1-based.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace sysid::io
