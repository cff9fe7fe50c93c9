// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "fishrope/experiments.hpp"
#include "fishrope/fixtures.hpp"
#include "fishrope/io.hpp"

namespace fishrope::cli {
namespace {

struct Globals {
  std::string calib;
  std::string out;
  std::string format = "csv";
  std::uint64_t seed = 1;
  bool seed_set = false;
  bool timing = false;
};

// An unreadable calibration is an input error, not an output failure.
Calibration read_calibration(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_calibration(text);
}

Calibration calibration_or_fixture(const Globals& g) {
  if (g.calib.empty()) return {fixtures::k4_camera(), std::nullopt};
  return read_calibration(g.calib);
}

Calibration required_calibration(const Globals& g) {
  if (g.calib.empty()) throw ConfigError("--calib is required for this subcommand");
  return read_calibration(g.calib);
}

void require_out(const Globals& g) {
  if (g.out.empty()) throw ConfigError("--out is required for this subcommand");
}

void emit(const Globals& g, const std::string& text, std::ostream& out) {
  if (g.out.empty()) out << text;
  else write_file(g.out, text);
}

std::string report_format(const Globals& g, bool format_given) {
  if (!format_given) return "json";
  if (g.format == "bin") throw ConfigError("reports have no binary format; use --format csv or omit it for JSON");
  return g.format;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"FishRoPE: angular rotary position embeddings for fisheye cameras", "fishrope"};
  app.fallthrough();
  app.require_subcommand(1);

  Globals g;
  app.add_option("--calib", g.calib, "Calibration document (JSON)");
  app.add_option("--out", g.out, "Output path");
  auto* format_opt = app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "bin"}));
  auto* seed_opt = app.add_option("--seed", g.seed, "RNG seed");

  int patch_size = 14;
  auto* angles = app.add_subcommand("angles", "Write the patch angle map");
  angles->add_option("--patch-size", patch_size, "Patch size in pixels")->check(CLI::PositiveNumber);

  int resolution = kDefaultLutResolution;
  auto* lut = app.add_subcommand("lut", "Write the radius-to-angle lookup table");
  lut->add_option("--resolution", resolution, "Number of table entries");

  double theta = 0.0, phi = 0.0;
  auto* proj = app.add_subcommand("project", "Project (theta, phi) to a pixel");
  proj->add_option("--theta", theta, "Incidence angle [rad]")->required();
  proj->add_option("--phi", phi, "Azimuth [rad]")->required();

  double u = 0.0, v = 0.0;
  std::string method = "newton";
  int iterations = kDefaultNewtonIterations;
  auto* unproj = app.add_subcommand("unproject", "Unproject a pixel to (theta, phi)");
  unproj->add_option("--u", u, "Pixel column")->required();
  unproj->add_option("--v", v, "Pixel row")->required();
  unproj->add_option("--method", method, "Inverse")->check(CLI::IsMember({"newton", "converged", "lut"}));
  unproj->add_option("--iterations", iterations, "Newton iterations");

  bool mutate = false;
  auto* check = app.add_subcommand("selfcheck", "Run the invariant suite");
  check->add_flag("--mutate-rotation-sign", mutate, "Run against a deliberately broken rotation");

  RetrievalBenchConfig bench_config{.camera = fixtures::k4_camera()};
  std::vector<std::string> encoding_names;
  auto* bench = app.add_subcommand("bench", "Angular retrieval benchmark");
  bench->add_option("--patch-size", bench_config.patch_size, "Key patch size")->check(CLI::PositiveNumber);
  bench->add_option("--queries", bench_config.n_queries, "Queries per set");
  bench->add_option("--feature-dim", bench_config.feature_dim, "Probe feature dimension");
  bench->add_option("--encodings", encoding_names, "Encodings to compare");
  bench->add_flag("--timing", g.timing, "Include wall-clock time in the report");

  BevScene scene = fixtures::bev_scene();
  double extent = 20.0, cell = 0.2, height = 2.0, square = 4.0;
  auto* lift = app.add_subcommand("lift", "BEV cross-attention round trip");
  lift->add_option("--patch-size", scene.patch_size, "Key patch size")->check(CLI::PositiveNumber);
  lift->add_option("--extent", extent, "Grid side length [m]");
  lift->add_option("--cell", cell, "Cell size [m]");
  lift->add_option("--height", height, "Camera height when the calibration has no extrinsics [m]");
  lift->add_option("--square", square, "Checkerboard square size [m]; 0 for a uniform ground");
  lift->add_option("--encodings", encoding_names, "Encodings to compare");
  lift->add_flag("--timing", g.timing, "Include wall-clock time in the report");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }
  g.seed_set = seed_opt->count() > 0;
  const bool format_given = format_opt->count() > 0;

  try {
    if (angles->parsed()) {
      require_out(g);
      const Calibration cal = required_calibration(g);
      const PatchGrid grid = patch_angles(cal.camera, patch_size);
      const AngleMap map = AngleMap::from(grid);
      std::ostringstream bytes;
      if (g.format == "bin") write_angle_map_binary(bytes, map);
      else write_angle_map_csv(bytes, map);
      write_file(g.out, bytes.str());
      double lo = cal.camera.theta_max(), hi = 0.0;
      for (int i = 0; i < grid.size(); ++i) {
        if (!grid.valid[static_cast<std::size_t>(i)]) continue;
        lo = std::min(lo, grid.coords[static_cast<std::size_t>(i)].theta);
        hi = std::max(hi, grid.coords[static_cast<std::size_t>(i)].theta);
      }
      out << "grid " << grid.rows << " x " << grid.cols << ", theta [" << lo << ", " << hi << "] rad, valid "
          << static_cast<double>(grid.valid_count()) / grid.size() << "\n";
    } else if (lut->parsed()) {
      require_out(g);
      const Calibration cal = required_calibration(g);
      if (resolution < 2) throw ConfigError("--resolution must be at least 2");
      const InverseLut table = build_lut(cal.camera, resolution);
      std::ostringstream bytes;
      if (g.format == "bin") write_lut_binary(bytes, table);
      else write_lut_csv(bytes, table);
      write_file(g.out, bytes.str());
      out << "lut " << table.resolution() << " entries, r_max " << table.r_max() << " px, theta_max "
          << table.theta_max() << " rad\n";
    } else if (proj->parsed()) {
      const Calibration cal = required_calibration(g);
      const Eigen::Vector2d px = project(cal.camera, theta, phi);
      out << format_double(px.x()) << " " << format_double(px.y()) << "\n";
    } else if (unproj->parsed()) {
      const Calibration cal = required_calibration(g);
      const Eigen::Vector2d px(u, v);
      AngularCoord c;
      if (method == "converged") c = unproject_converged(cal.camera, px);
      else if (method == "lut") c = unproject_lut(cal.camera, build_lut(cal.camera), px);
      else c = unproject_newton(cal.camera, px, iterations);
      out << format_double(c.theta) << " " << format_double(c.phi) << "\n";
    } else if (check->parsed()) {
      SelfcheckOptions options;
      options.mutate_rotation_sign = mutate;
      if (g.seed_set) options.seed = g.seed;
      const SelfcheckReport report = selfcheck(options);
      const std::string fmt = report_format(g, format_given);
      emit(g, fmt == "csv" ? selfcheck_report_csv(report) : selfcheck_report_json(report), out);
      for (const auto& c : report.checks) {
        if (!c.passed) err << "FAILED " << c.name << " measured " << c.measured << " tolerance " << c.tolerance << "\n";
      }
      return report.passed() ? kOk : kRuntime;
    } else if (bench->parsed()) {
      const std::string fmt = report_format(g, format_given);
      bench_config.camera = calibration_or_fixture(g).camera;
      bench_config.seed = g.seed;
      if (!encoding_names.empty()) {
        bench_config.encodings.clear();
        for (const auto& n : encoding_names) bench_config.encodings.push_back(parse_encoding(n));
      }
      const BenchReport report = retrieval_bench(bench_config);
      if (report.degenerate_camera) err << "warning: camera is nearly distortion-free (extent ratio " << report.extent_ratio << ")\n";
      emit(g, fmt == "csv" ? bench_report_csv(report) : bench_report_json(report, g.timing), out);
    } else if (lift->parsed()) {
      const std::string fmt = report_format(g, format_given);
      const Calibration cal = calibration_or_fixture(g);
      scene.camera = cal.camera;
      scene.extrinsics = cal.extrinsics ? *cal.extrinsics : Extrinsics::looking_down(height);
      scene.grid = BevGridSpec::from_extent(extent, extent, cell);
      if (square < 0.0) throw ConfigError("--square must be non-negative");
      scene.pattern = square == 0.0 ? GroundPattern{} : GroundPattern{GroundPattern::Kind::checkerboard, square};
      std::vector<Encoding> encodings{Encoding::none, Encoding::sinusoidal, Encoding::axial_rope, Encoding::fishrope};
      if (!encoding_names.empty()) {
        encodings.clear();
        for (const auto& n : encoding_names) encodings.push_back(parse_encoding(n));
      }
      const LiftReport report = lift_experiment(scene, encodings, g.seed);
      emit(g, fmt == "csv" ? lift_report_csv(report) : lift_report_json(report, g.timing), out);
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const CalibrationError& e) {
    err << "error: calibration field '" << e.field() << "': " << e.what() << "\n";
    return kConfig;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const OutOfImageCircleError& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}

}  // namespace fishrope::cli
