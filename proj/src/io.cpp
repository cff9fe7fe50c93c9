// SPDX-License-Identifier: Apache-2.0
#include "fishrope/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace fishrope {

using nlohmann::json;

namespace {

const json& require(const json& doc, const char* field, const char* prefix = "") {
  if (!doc.contains(field)) throw CalibrationError(std::string(prefix) + field, "missing");
  return doc.at(field);
}

double number(const json& v, const std::string& field) {
  if (!v.is_number()) throw CalibrationError(field, "expected a number");
  return v.get<double>();
}

std::vector<double> numbers(const json& v, const std::string& field, std::size_t min_size, std::size_t max_size) {
  if (!v.is_array()) throw CalibrationError(field, "expected an array of numbers");
  if (v.size() < min_size || v.size() > max_size) {
    throw CalibrationError(field, "expected " +
                                      (min_size == max_size ? std::to_string(min_size)
                                                            : std::to_string(min_size) + " or more") +
                                      " numbers, got " + std::to_string(v.size()));
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

int positive_int(double value, const std::string& field) {
  if (!(value >= 1.0) || value != std::floor(value) || value > 1e9) {
    throw CalibrationError(field, "expected a positive integer");
  }
  return static_cast<int>(value);
}

}  // namespace

Calibration parse_calibration(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CalibrationError("document", std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw CalibrationError("document", "expected an object");

  const json& model = require(doc, "model");
  if (!model.is_string()) throw CalibrationError("model", "expected a string");
  if (model.get<std::string>() != "kannala_brandt") {
    throw CalibrationError("model", "unsupported model '" + model.get<std::string>() + "'");
  }
  const std::vector<double> coeffs = numbers(require(doc, "coeffs"), "coeffs", 1, 64);
  const std::vector<double> pp = numbers(require(doc, "principal_point"), "principal_point", 2, 2);
  const double theta_max = number(require(doc, "theta_max"), "theta_max");
  const std::vector<double> size = numbers(require(doc, "image_size"), "image_size", 2, 2);
  const Eigen::Vector2i image_size(positive_int(size[0], "image_size[0]"), positive_int(size[1], "image_size[1]"));

  std::optional<KannalaBrandtCamera> camera;
  try {
    camera.emplace(coeffs, Eigen::Vector2d(pp[0], pp[1]), theta_max, image_size);
  } catch (const Error& e) {
    const std::string what = e.what();
    std::string field = "coeffs";
    if (what.find("theta_max") != std::string::npos) field = "theta_max";
    else if (what.find("principal point") != std::string::npos) field = "principal_point";
    else if (what.find("image size") != std::string::npos) field = "image_size";
    throw CalibrationError(field, what);
  }

  Calibration cal{*camera, std::nullopt};
  if (doc.contains("extrinsics")) {
    const json& ext = doc.at("extrinsics");
    if (!ext.is_object()) throw CalibrationError("extrinsics", "expected an object");
    const std::vector<double> r = numbers(require(ext, "rotation", "extrinsics."), "extrinsics.rotation", 9, 9);
    const std::vector<double> t = numbers(require(ext, "translation", "extrinsics."), "extrinsics.translation", 3, 3);
    Eigen::Matrix3d rotation;
    rotation << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
    try {
      cal.extrinsics = Extrinsics(rotation, Eigen::Vector3d(t[0], t[1], t[2]));
    } catch (const Error& e) {
      throw CalibrationError("extrinsics.rotation", e.what());
    }
  }
  return cal;
}

Calibration load_calibration(const std::filesystem::path& path) { return parse_calibration(read_file(path)); }

std::string serialize_calibration(const Calibration& calibration) {
  const KannalaBrandtCamera& cam = calibration.camera;
  json doc;
  doc["model"] = "kannala_brandt";
  doc["coeffs"] = cam.coeffs();
  doc["principal_point"] = {cam.principal_point().x(), cam.principal_point().y()};
  doc["theta_max"] = cam.theta_max();
  doc["image_size"] = {cam.image_size().x(), cam.image_size().y()};
  if (calibration.extrinsics) {
    const Eigen::Matrix3d& r = calibration.extrinsics->rotation();
    const Eigen::Vector3d& t = calibration.extrinsics->translation();
    json rot = json::array();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) rot.push_back(r(i, j));
    }
    doc["extrinsics"] = {{"rotation", rot}, {"translation", {t.x(), t.y(), t.z()}}};
  }
  return doc.dump(2) + "\n";
}

AngleMap AngleMap::from(const PatchGrid& grid) {
  return {grid.rows, grid.cols, grid.patch_size, grid.theta_max, grid.coords, grid.valid};
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

constexpr const char* kAngleCsvTag = "# fishrope angle map v";
constexpr const char* kAngleCsvHeader = "row,col,theta,phi,valid";

double parse_double(std::string_view text, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw FormatError(where + ": cannot parse '" + std::string(text) + "' as a number");
  }
  return v;
}

long long parse_int(std::string_view text, const std::string& where) {
  long long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw FormatError(where + ": cannot parse '" + std::string(text) + "' as an integer");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

void check_stream(const std::ostream& out) {
  if (!out) throw IoError("write failed");
}

void put_doubles(std::ostream& out, const double* values, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(values[i]);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char bytes[8];
    std::memcpy(bytes, &bits, 8);
    out.write(bytes, 8);
  }
}

std::vector<double> get_doubles(std::istream& in, std::size_t n, const char* what) {
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    char bytes[8];
    if (!in.read(bytes, 8)) throw FormatError(std::string(what) + ": truncated file");
    std::uint64_t bits;
    std::memcpy(&bits, bytes, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    values[i] = std::bit_cast<double>(bits);
  }
  return values;
}

void expect_end(std::istream& in, const char* what) {
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(std::string(what) + ": trailing bytes");
}

void check_header(double magic, double expected_magic, double version, const char* what) {
  if (magic != expected_magic) throw FormatError(std::string(what) + ": bad magic number");
  if (version != kFormatVersion) {
    throw FormatError(std::string(what) + ": unsupported format version " + format_double(version));
  }
}

int header_count(double v, const char* what, const char* field) {
  if (!(v >= 0.0) || v != std::floor(v) || v > 1e9) throw FormatError(std::string(what) + ": bad " + field);
  return static_cast<int>(v);
}

}  // namespace

void write_angle_map_csv(std::ostream& out, const AngleMap& map) {
  out << kAngleCsvTag << kFormatVersion << "\n" << kAngleCsvHeader << "\n";
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      const auto i = static_cast<std::size_t>(r * map.cols + c);
      out << r << ',' << c << ',' << format_double(map.coords[i].theta) << ',' << format_double(map.coords[i].phi)
          << ',' << (map.valid[i] ? 1 : 0) << '\n';
    }
  }
  check_stream(out);
}

AngleMap read_angle_map_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(kAngleCsvTag, 0) != 0) throw FormatError("angle map CSV: missing version line");
  const long long version = parse_int(std::string_view(line).substr(std::strlen(kAngleCsvTag)), "angle map CSV version");
  if (version != kFormatVersion) throw FormatError("angle map CSV: unsupported format version " + std::to_string(version));
  if (!std::getline(in, line) || line != kAngleCsvHeader) throw FormatError("angle map CSV: bad column header");

  AngleMap map;
  int expected_row = 0, expected_col = 0;
  std::vector<std::pair<int, int>> cells;
  int line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "angle map CSV line " + std::to_string(line_no);
    const auto f = split(line, ',');
    if (f.size() != 5) throw FormatError(where + ": expected 5 fields");
    const auto r = static_cast<int>(parse_int(f[0], where));
    const auto c = static_cast<int>(parse_int(f[1], where));
    cells.emplace_back(r, c);
    map.coords.push_back({parse_double(f[2], where), parse_double(f[3], where)});
    const long long v = parse_int(f[4], where);
    if (v != 0 && v != 1) throw FormatError(where + ": valid must be 0 or 1");
    map.valid.push_back(v == 1);
    expected_row = std::max(expected_row, r + 1);
    expected_col = std::max(expected_col, c + 1);
  }
  map.rows = expected_row;
  map.cols = expected_col;
  if (static_cast<std::size_t>(map.rows) * static_cast<std::size_t>(map.cols) != cells.size()) {
    throw FormatError("angle map CSV: rows do not form a full grid");
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i] != std::pair<int, int>(static_cast<int>(i) / map.cols, static_cast<int>(i) % map.cols)) {
      throw FormatError("angle map CSV: rows out of row-major order");
    }
  }
  return map;
}

void write_angle_map_binary(std::ostream& out, const AngleMap& map) {
  const double header[8] = {kAngleMapMagic, double(kFormatVersion), double(map.rows), double(map.cols),
                            double(map.patch_size), map.theta_max, 0.0, 0.0};
  put_doubles(out, header, 8);
  for (std::size_t i = 0; i < map.coords.size(); ++i) {
    const double rec[3] = {map.coords[i].theta, map.coords[i].phi, map.valid[i] ? 1.0 : 0.0};
    put_doubles(out, rec, 3);
  }
  check_stream(out);
}

AngleMap read_angle_map_binary(std::istream& in) {
  const char* what = "angle map";
  const std::vector<double> h = get_doubles(in, 8, what);
  check_header(h[0], kAngleMapMagic, h[1], what);
  AngleMap map;
  map.rows = header_count(h[2], what, "row count");
  map.cols = header_count(h[3], what, "column count");
  map.patch_size = header_count(h[4], what, "patch size");
  map.theta_max = h[5];
  const auto n = static_cast<std::size_t>(map.rows) * static_cast<std::size_t>(map.cols);
  const std::vector<double> body = get_doubles(in, 3 * n, what);
  for (std::size_t i = 0; i < n; ++i) {
    map.coords.push_back({body[3 * i], body[3 * i + 1]});
    if (body[3 * i + 2] != 0.0 && body[3 * i + 2] != 1.0) throw FormatError("angle map: valid flag must be 0 or 1");
    map.valid.push_back(body[3 * i + 2] == 1.0);
  }
  expect_end(in, what);
  return map;
}

void write_lut_binary(std::ostream& out, const InverseLut& lut) {
  const double header[5] = {kLutMagic, double(kFormatVersion), double(lut.resolution()), lut.r_max(), lut.theta_max()};
  put_doubles(out, header, 5);
  put_doubles(out, lut.entries().data(), lut.entries().size());
  check_stream(out);
}

InverseLut read_lut_binary(std::istream& in) {
  const char* what = "LUT";
  const std::vector<double> h = get_doubles(in, 5, what);
  check_header(h[0], kLutMagic, h[1], what);
  const int resolution = header_count(h[2], what, "resolution");
  if (resolution < 2) throw FormatError("LUT: resolution must be at least 2");
  std::vector<double> entries = get_doubles(in, static_cast<std::size_t>(resolution), what);
  expect_end(in, what);
  if (entries.back() != h[4]) throw FormatError("LUT: last entry disagrees with theta_max");
  try {
    return InverseLut(std::move(entries), h[3]);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("LUT: ") + e.what());
  }
}

void write_lut_csv(std::ostream& out, const InverseLut& lut) {
  out << "# fishrope lut v" << kFormatVersion << "\nindex,radius,theta\n";
  for (int i = 0; i < lut.resolution(); ++i) {
    out << i << ',' << format_double(lut.step() * i) << ',' << format_double(lut.entries()[static_cast<std::size_t>(i)])
        << '\n';
  }
  check_stream(out);
}

void write_attention_csv(std::ostream& out, const Eigen::MatrixXd& logits, const Eigen::MatrixXd& weights) {
  if (logits.rows() != weights.rows() || logits.cols() != weights.cols()) {
    throw ShapeError("attention CSV: logits and weights differ in shape");
  }
  out << "q_index,k_index,logit,weight\n";
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      out << i << ',' << j << ',' << format_double(logits(i, j)) << ',' << format_double(weights(i, j)) << '\n';
    }
  }
  check_stream(out);
}

std::string bench_report_json(const BenchReport& report, bool include_timing) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["kind"] = "retrieval_bench";
  doc["keys"] = report.keys;
  doc["patch_size"] = report.patch_size;
  doc["extent_ratio"] = report.extent_ratio;
  doc["degenerate_camera"] = report.degenerate_camera;
  json sets = json::array();
  for (const auto& s : report.sets) {
    json scores = json::array();
    for (const auto& e : s.scores) {
      scores.push_back({{"encoding", to_string(e.encoding)},
                        {"top1", e.top1},
                        {"mean_rank", e.mean_rank},
                        {"seam_queries", e.seam_queries},
                        {"seam_top1", e.seam_top1},
                        {"off_seam_top1", e.off_seam_top1}});
    }
    sets.push_back({{"name", s.name}, {"queries", s.queries}, {"scores", scores}});
  }
  doc["sets"] = sets;
  if (include_timing) doc["runtime_seconds"] = report.runtime_seconds;
  return doc.dump(2) + "\n";
}

std::string bench_report_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "set,encoding,queries,top1,mean_rank,seam_queries,seam_top1,off_seam_top1\n";
  for (const auto& s : report.sets) {
    for (const auto& e : s.scores) {
      out << s.name << ',' << to_string(e.encoding) << ',' << s.queries << ',' << format_double(e.top1) << ','
          << format_double(e.mean_rank) << ',' << e.seam_queries << ',' << format_double(e.seam_top1) << ','
          << format_double(e.off_seam_top1) << '\n';
    }
  }
  return out.str();
}

std::string lift_report_json(const LiftReport& report, bool include_timing) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["kind"] = "bev_lift";
  doc["visible_cells"] = report.visible_cells;
  doc["keys"] = report.keys;
  doc["ground_keys"] = report.ground_keys;
  doc["peripheral_theta"] = report.peripheral_theta;
  json results = json::array();
  auto region = [](const RegionScore& r) {
    return json{{"cells", r.cells}, {"correct", r.correct}, {"accuracy", r.accuracy()}};
  };
  for (const auto& r : report.results) {
    results.push_back({{"encoding", to_string(r.encoding)},
                       {"overall", region(r.overall)},
                       {"central", region(r.central)},
                       {"peripheral", region(r.peripheral)}});
  }
  doc["results"] = results;
  if (include_timing) doc["runtime_seconds"] = report.runtime_seconds;
  return doc.dump(2) + "\n";
}

std::string lift_report_csv(const LiftReport& report) {
  std::ostringstream out;
  out << "encoding,region,cells,correct,accuracy\n";
  for (const auto& r : report.results) {
    const std::pair<const char*, const RegionScore*> rows[] = {
        {"overall", &r.overall}, {"central", &r.central}, {"peripheral", &r.peripheral}};
    for (const auto& [name, s] : rows) {
      out << to_string(r.encoding) << ',' << name << ',' << s->cells << ',' << s->correct << ','
          << format_double(s->accuracy()) << '\n';
    }
  }
  return out.str();
}

std::string selfcheck_report_json(const SelfcheckReport& report) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["kind"] = "selfcheck";
  doc["passed"] = report.passed();
  json checks = json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"measured", c.measured},
                      {"tolerance", c.tolerance},
                      {"detail", c.detail}});
  }
  doc["checks"] = checks;
  return doc.dump(2) + "\n";
}

std::string selfcheck_report_csv(const SelfcheckReport& report) {
  std::ostringstream out;
  out << "name,passed,measured,tolerance,detail\n";
  for (const auto& c : report.checks) {
    out << c.name << ',' << (c.passed ? 1 : 0) << ',' << format_double(c.measured) << ','
        << format_double(c.tolerance) << ",\"" << c.detail << "\"\n";
  }
  return out.str();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError("error while writing '" + path.string() + "'");
}

}  // namespace fishrope
