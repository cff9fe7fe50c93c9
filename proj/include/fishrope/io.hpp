// SPDX-License-Identifier: Apache-2.0
//
// Calibration documents, angle-map and LUT files, and experiment reports.
// Byte layouts are described in docs/formats.md.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fishrope/angular.hpp"
#include "fishrope/attention.hpp"
#include "fishrope/camera.hpp"
#include "fishrope/experiments.hpp"

namespace fishrope {

inline constexpr int kFormatVersion = 1;
/// The integer values of "FRAM" and "FRLT" read little-endian, stored as doubles.
inline constexpr double kAngleMapMagic = 1296126534.0;
inline constexpr double kLutMagic = 1414287942.0;

struct Calibration {
  KannalaBrandtCamera camera;
  std::optional<Extrinsics> extrinsics;
};

/// Parses a calibration document. Throws CalibrationError naming the field.
Calibration parse_calibration(const std::string& text);
/// Throws IoError when the file cannot be read.
Calibration load_calibration(const std::filesystem::path& path);
std::string serialize_calibration(const Calibration& calibration);

/// Flat view of a patch grid as stored on disk.
struct AngleMap {
  int rows = 0;
  int cols = 0;
  int patch_size = 0;
  double theta_max = 0.0;
  std::vector<AngularCoord> coords;
  std::vector<bool> valid;

  static AngleMap from(const PatchGrid& grid);
  friend bool operator==(const AngleMap&, const AngleMap&) = default;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

void write_angle_map_csv(std::ostream& out, const AngleMap& map);
/// patch_size and theta_max are not stored in CSV and come back as zero.
AngleMap read_angle_map_csv(std::istream& in);
void write_angle_map_binary(std::ostream& out, const AngleMap& map);
AngleMap read_angle_map_binary(std::istream& in);

void write_lut_binary(std::ostream& out, const InverseLut& lut);
InverseLut read_lut_binary(std::istream& in);
void write_lut_csv(std::ostream& out, const InverseLut& lut);

/// One line per query/key pair: q_index,k_index,logit,weight.
void write_attention_csv(std::ostream& out, const Eigen::MatrixXd& logits, const Eigen::MatrixXd& weights);

/// Reports omit wall-clock timing unless asked, so equal runs give equal bytes.
std::string bench_report_json(const BenchReport& report, bool include_timing = false);
std::string bench_report_csv(const BenchReport& report);
std::string lift_report_json(const LiftReport& report, bool include_timing = false);
std::string lift_report_csv(const LiftReport& report);
std::string selfcheck_report_json(const SelfcheckReport& report);
std::string selfcheck_report_csv(const SelfcheckReport& report);

/// Whole-file helpers; throw IoError.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace fishrope
