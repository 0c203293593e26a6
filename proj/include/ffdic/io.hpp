#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ffdic/dic.hpp"
#include "ffdic/image.hpp"
#include "ffdic/imaging.hpp"
#include "ffdic/strain.hpp"

namespace ffdic {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// PGM (P5). Written as 16-bit big-endian with [0,1] -> [0,65535]; readers
// accept any maxval (8-bit when maxval < 256).

inline void write_pgm(std::ostream& os, const Image& img) {
  os << "P5\n" << img.width() << ' ' << img.height() << "\n65535\n";
  std::vector<char> buf(img.size() * 2);
  std::size_t k = 0;
  for (double v : img.pixels()) {
    const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
    buf[k++] = static_cast<char>(q >> 8);
    buf[k++] = static_cast<char>(q & 0xFF);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline void write_pgm(const std::filesystem::path& path, const Image& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_pgm(os, img);
  if (!os) throw IoError("failed writing " + path.string());
}

namespace detail {

inline long read_pgm_token(std::istream& is) {
  std::string tok;
  for (;;) {
    int c = is.peek();
    if (c == EOF) throw IoError("truncated PGM header");
    if (c == '#') {
      std::string comment;
      std::getline(is, comment);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
  }
  while (is.peek() != EOF && !std::isspace(is.peek())) tok.push_back(static_cast<char>(is.get()));
  try {
    return std::stol(tok);
  } catch (const std::exception&) {
    throw IoError("malformed PGM header token '" + tok + "'");
  }
}

}  // namespace detail

inline Image read_pgm(std::istream& is) {
  char magic[2] = {};
  is.read(magic, 2);
  if (!is || magic[0] != 'P' || magic[1] != '5') throw IoError("not a binary PGM (P5) stream");
  const long w = detail::read_pgm_token(is);
  const long h = detail::read_pgm_token(is);
  const long maxval = detail::read_pgm_token(is);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) throw IoError("invalid PGM dimensions or maxval");
  is.get();  // single whitespace before raster
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  const std::size_t bytes = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> buf(n * bytes);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size()) throw IoError("truncated PGM raster");
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned q = bytes == 1 ? buf[i] : (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1];
    data[i] = static_cast<double>(q) / static_cast<double>(maxval);
  }
  return Image(static_cast<int>(w), static_cast<int>(h), std::move(data));
}

inline Image read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_pgm(is);
}

// ---------------------------------------------------------------------------
// DotSet JSON: {"centers": [[x, y], ...], "radius": r, "domain": {"width": w, "height": h}}

inline nlohmann::json to_json(const DotSet& dots) {
  nlohmann::json centers = nlohmann::json::array();
  for (const auto& c : dots.centers) centers.push_back({c.x, c.y});
  return {{"centers", std::move(centers)},
          {"radius", dots.radius},
          {"domain", {{"width", dots.domain_width}, {"height", dots.domain_height}}}};
}

inline DotSet dots_from_json(const nlohmann::json& j) {
  DotSet dots;
  try {
    dots.radius = j.at("radius").get<double>();
    dots.domain_width = j.at("domain").at("width").get<int>();
    dots.domain_height = j.at("domain").at("height").get<int>();
    for (const auto& c : j.at("centers")) {
      if (!c.is_array() || c.size() != 2) throw IoError("dot center must be an [x, y] pair");
      dots.centers.push_back({c[0].get<double>(), c[1].get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed dot set: ") + e.what());
  }
  if (!(dots.radius > 0.0)) throw IoError("dot radius must be > 0");
  for (const auto& c : dots.centers) {
    if (!std::isfinite(c.x) || !std::isfinite(c.y)) throw IoError("dot centers must be finite");
  }
  return dots;
}

// ---------------------------------------------------------------------------
// CSV tables for displacement and strain fields.

inline constexpr const char* kFieldCsvHeader = "x,y,u,v,zncc,iterations,converged";
inline constexpr const char* kStrainCsvHeader = "x,y,exx,eyy,exy";

inline void write_field_csv(std::ostream& os, const DisplacementField& field) {
  os << kFieldCsvHeader << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t k = 0; k < field.size(); ++k) {
    os << field.grid.points[k].x << ',' << field.grid.points[k].y << ',' << field.u[k] << ',' << field.v[k]
       << ',' << field.zncc[k] << ',' << field.iterations[k] << ',' << int(field.converged[k]) << '\n';
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

/// Reads a field CSV; the points must form a complete rectangular lattice.
inline DisplacementField read_field_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty field CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kFieldCsvHeader) throw IoError("unexpected field CSV header: " + line);

  struct Row {
    int x, y;
    double u, v, zncc;
    int iterations;
    bool converged;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 7) throw IoError("field CSV line " + std::to_string(lineno) + ": expected 7 columns");
    try {
      rows.push_back({std::stoi(cells[0]), std::stoi(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                      std::stod(cells[4]), std::stoi(cells[5]), std::stoi(cells[6]) != 0});
    } catch (const std::exception&) {
      throw IoError("field CSV line " + std::to_string(lineno) + ": malformed number");
    }
  }
  if (rows.empty()) throw IoError("field CSV has no data rows");

  std::vector<int> xs, ys;
  for (const auto& r : rows) {
    xs.push_back(r.x);
    ys.push_back(r.y);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  if (xs.size() * ys.size() != rows.size()) throw IoError("field CSV points do not form a full lattice");

  std::map<std::pair<int, int>, const Row*> by_pos;
  for (const auto& r : rows) {
    if (!by_pos.emplace(std::pair{r.y, r.x}, &r).second) throw IoError("duplicate point in field CSV");
  }
  DisplacementField field;
  field.grid.rows = static_cast<int>(ys.size());
  field.grid.cols = static_cast<int>(xs.size());
  field.grid.step = xs.size() > 1 ? xs[1] - xs[0] : (ys.size() > 1 ? ys[1] - ys[0] : 1);
  field.resize(rows.size());
  std::size_t k = 0;
  for (const auto& [pos, r] : by_pos) {
    field.grid.points.push_back({r->x, r->y});
    field.u[k] = r->u;
    field.v[k] = r->v;
    field.zncc[k] = r->zncc;
    field.iterations[k] = r->iterations;
    field.converged[k] = r->converged ? 1 : 0;
    field.status[k] = r->converged ? PointStatus::kConverged : PointStatus::kMaxIterations;
    ++k;
  }
  return field;
}

inline void write_strain_csv(std::ostream& os, const StrainField& field) {
  os << kStrainCsvHeader << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t k = 0; k < field.size(); ++k) {
    os << field.points[k].x << ',' << field.points[k].y << ',' << field.exx[k] << ',' << field.eyy[k] << ','
       << field.exy[k] << '\n';
  }
}

}  // namespace ffdic
