#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include <json.hpp>

#include "atpg/sim.hpp"

namespace atpg::trace_io {

/// {steps:[{t, pose:[16, row-major], u:[6], targets:[{mean, info, weight, in_fov}]}], reward_normalized, tau}
/// info is n_y*n_y, row-major.
nlohmann::json toJson(const EpisodeTrace& trace);
EpisodeTrace fromJson(const nlohmann::json& doc);

/// One row per (step, target):
/// t,target,x,y,z,yaw,v,omega,mean_0..,info_00..,weight,in_fov,truth_0..
void writeCsv(std::ostream& out, const EpisodeTrace& trace);

void save(const std::filesystem::path& json_path, const std::filesystem::path& csv_path, const EpisodeTrace& trace);

/// Shortest decimal form that round-trips (17 significant digits).
std::string formatDouble(double x);

}  // namespace atpg::trace_io
