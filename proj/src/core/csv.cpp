#include "core/csv.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "core/errors.hpp"

namespace qdpost {

namespace {

using nlohmann::json;

constexpr char kGridMagic[8] = {'Q', 'D', 'P', 'N', 'F', '0', '1', '\n'};

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : path_(path) {
    file_ = std::fopen(path.c_str(), "wb");
    if (!file_) throw IoError("cannot open for writing: " + path);
  }
  ~CsvWriter() {
    if (file_) std::fclose(file_);
  }
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void line(const std::string& s) {
    if (std::fputs(s.c_str(), file_) == EOF || std::fputc('\n', file_) == EOF)
      throw IoError("write failed: " + path_);
  }
  std::FILE* handle() { return file_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::FILE* file_ = nullptr;
};

class CsvReader {
 public:
  explicit CsvReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw IoError("cannot open: " + path);
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    fields.clear();
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    return true;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw IoError(path_ + ":" + std::to_string(line_no_) + ": " + what);
  }

  double to_double(const std::string& s) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) fail("not a number: '" + s + "'");
      return v;
    } catch (const std::invalid_argument&) {
      fail("not a number: '" + s + "'");
    } catch (const std::out_of_range&) {
      fail("number out of range: '" + s + "'");
    }
  }

  std::uint64_t to_u64(const std::string& s) const {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(s, &used);
      if (used != s.size()) fail("not an integer: '" + s + "'");
      return v;
    } catch (const std::invalid_argument&) {
      fail("not an integer: '" + s + "'");
    } catch (const std::out_of_range&) {
      fail("integer out of range: '" + s + "'");
    }
  }

  int line_no() const { return line_no_; }

 private:
  std::string path_;
  std::ifstream in_;
  int line_no_ = 0;
};

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace

std::string sidecar_path(const std::string& data_path) {
  std::string base = data_path;
  if (base.size() > 4 && base.substr(base.size() - 4) == ".csv")
    base.resize(base.size() - 4);
  return base + ".meta.json";
}

void write_stream_csv(const EmissionStream& stream, const std::string& path) {
  CsvWriter w(path);
  w.line("pulse_index,time_ns,origin,polarization");
  char buf[128];
  for (const auto& e : stream.events) {
    std::snprintf(buf, sizeof buf, "%" PRIu64 ",%.6f,%s,%s", e.pulse_index,
                  stream.abs_time_ns(e),
                  e.origin == Origin::QDLine ? "qd" : "background",
                  e.polarization == Polarization::Linear ? "linear"
                                                         : "unpolarized");
    w.line(buf);
  }
}

void write_records_csv(const DetectionRecords& records,
                       const std::string& path) {
  CsvWriter w(path);
  w.line("detector,time_ns");
  char buf[64];
  std::size_t i = 0, j = 0;
  while (i < records.d1_ns.size() || j < records.d2_ns.size()) {
    const bool take1 =
        j >= records.d2_ns.size() ||
        (i < records.d1_ns.size() && records.d1_ns[i] <= records.d2_ns[j]);
    if (take1) {
      std::snprintf(buf, sizeof buf, "D1,%.6f", records.d1_ns[i++]);
    } else {
      std::snprintf(buf, sizeof buf, "D2,%.6f", records.d2_ns[j++]);
    }
    w.line(buf);
  }
}

void write_records_meta(const DetectionRecords& records, std::uint64_t seed,
                        const std::string& config_hash,
                        const std::string& path) {
  json j;
  j["duration_ns"] = records.duration_ns;
  j["total_pulses"] = records.total_pulses;
  j["n_d1"] = records.d1_ns.size();
  j["n_d2"] = records.d2_ns.size();
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  write_json_file(j, path);
}

DetectionRecords read_records_csv(const std::string& path) {
  CsvReader r(path);
  std::vector<std::string> f;
  if (!r.next(f)) r.fail("empty file");
  if (f.size() != 2 || f[0] != "detector" || f[1] != "time_ns")
    r.fail("expected header 'detector,time_ns'");
  DetectionRecords rec;
  while (r.next(f)) {
    if (f.size() == 1 && f[0].empty()) continue;  // trailing newline
    if (f.size() != 2) r.fail("expected 2 fields");
    const double t = r.to_double(f[1]);
    if (f[0] == "D1")
      rec.d1_ns.push_back(t);
    else if (f[0] == "D2")
      rec.d2_ns.push_back(t);
    else
      r.fail("unknown detector '" + f[0] + "'");
  }
  std::sort(rec.d1_ns.begin(), rec.d1_ns.end());
  std::sort(rec.d2_ns.begin(), rec.d2_ns.end());
  return rec;
}

bool read_records_meta(const std::string& csv_path, DetectionRecords& records) {
  const std::string meta = sidecar_path(csv_path);
  if (!std::filesystem::exists(meta)) return false;
  const json j = read_json_file(meta);
  records.duration_ns = j.value("duration_ns", 0.0);
  records.total_pulses = j.value("total_pulses", std::uint64_t{0});
  return true;
}

void write_histogram_csv(const CorrelationHistogram& hist,
                         const std::string& path) {
  CsvWriter w(path);
  w.line("bin_center_ns,counts");
  char buf[64];
  for (std::size_t i = 0; i < hist.n_bins(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f,%" PRIu64, hist.bin_center(i),
                  hist.counts[i]);
    w.line(buf);
  }
}

void write_histogram_meta(const CorrelationHistogram& hist, std::uint64_t seed,
                          const std::string& config_hash,
                          const std::string& path) {
  json j;
  j["bin_width_ns"] = hist.bin_width_ns;
  j["window_ns"] = hist.window_ns;
  j["mode"] = hist.mode == HistogramMode::AllPairs ? "all_pairs" : "start_stop";
  j["total_pulses"] = hist.total_pulses;
  j["duration_ns"] = hist.duration_ns;
  j["n_d1"] = hist.n_d1;
  j["n_d2"] = hist.n_d2;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  write_json_file(j, path);
}

CorrelationHistogram read_histogram_csv(const std::string& path) {
  CsvReader r(path);
  std::vector<std::string> f;
  if (!r.next(f)) r.fail("empty file");
  if (f.size() != 2 || f[0] != "bin_center_ns" || f[1] != "counts")
    r.fail("expected header 'bin_center_ns,counts'");
  std::vector<double> centers;
  CorrelationHistogram hist;
  while (r.next(f)) {
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != 2) r.fail("expected 2 fields");
    centers.push_back(r.to_double(f[0]));
    hist.counts.push_back(r.to_u64(f[1]));
  }
  if (centers.size() < 2) r.fail("histogram needs at least 2 bins");
  const double w = centers[1] - centers[0];
  if (!(w > 0.0)) r.fail("bin centers must increase");
  for (std::size_t i = 1; i < centers.size(); ++i)
    if (std::abs(centers[i] - centers[i - 1] - w) > 1e-6 * w)
      r.fail("bins must be uniform");
  hist.bin_width_ns = w;
  hist.window_ns = -(centers.front() - 0.5 * w);

  const std::string meta = sidecar_path(path);
  if (std::filesystem::exists(meta)) {
    const json j = read_json_file(meta);
    hist.bin_width_ns = j.value("bin_width_ns", hist.bin_width_ns);
    hist.window_ns = j.value("window_ns", hist.window_ns);
    hist.mode = j.value("mode", "all_pairs") == std::string("start_stop")
                    ? HistogramMode::StartStop
                    : HistogramMode::AllPairs;
    hist.total_pulses = j.value("total_pulses", std::uint64_t{0});
    hist.duration_ns = j.value("duration_ns", 0.0);
    hist.n_d1 = j.value("n_d1", std::uint64_t{0});
    hist.n_d2 = j.value("n_d2", std::uint64_t{0});
  }
  return hist;
}

std::vector<SpectrumSample> read_spectrum_csv(const std::string& path) {
  CsvReader r(path);
  std::vector<std::string> f;
  if (!r.next(f)) r.fail("empty file");
  if (f.size() != 2 || f[0] != "wavelength_nm" || f[1] != "intensity")
    r.fail("expected header 'wavelength_nm,intensity'");
  std::vector<SpectrumSample> spectrum;
  while (r.next(f)) {
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != 2) r.fail("expected 2 fields");
    spectrum.push_back({r.to_double(f[0]), r.to_double(f[1])});
    if (spectrum.size() > 1 &&
        !(spectrum.back().wavelength_nm >
          spectrum[spectrum.size() - 2].wavelength_nm))
      r.fail("wavelengths must be strictly increasing");
  }
  return spectrum;
}

FieldGrid read_field_grid(const std::string& path) {
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open: " + path);
    char magic[8] = {};
    probe.read(magic, 8);
    if (probe.gcount() == 8 && std::memcmp(magic, kGridMagic, 8) == 0) {
      std::uint32_t nx = 0, ny = 0;
      double dx = 0.0, dy = 0.0;
      probe.read(reinterpret_cast<char*>(&nx), 4);
      probe.read(reinterpret_cast<char*>(&ny), 4);
      probe.read(reinterpret_cast<char*>(&dx), 8);
      probe.read(reinterpret_cast<char*>(&dy), 8);
      if (!probe) throw IoError(path + ": truncated grid header");
      FieldGrid g;
      g.nx = nx;
      g.ny = ny;
      g.dx_um = dx;
      g.dy_um = dy;
      g.amplitudes.resize(static_cast<std::size_t>(nx) * ny);
      for (auto& a : g.amplitudes) {
        double re = 0.0, im = 0.0;
        probe.read(reinterpret_cast<char*>(&re), 8);
        probe.read(reinterpret_cast<char*>(&im), 8);
        if (!probe) throw IoError(path + ": truncated grid data");
        a = {re, im};
      }
      g.validate();
      return g;
    }
  }

  CsvReader r(path);
  std::vector<std::string> f;
  if (!r.next(f)) r.fail("empty file");
  if (f.size() != 4) r.fail("expected grid header 'nx,ny,dx_um,dy_um'");
  FieldGrid g;
  g.nx = static_cast<std::size_t>(r.to_u64(f[0]));
  g.ny = static_cast<std::size_t>(r.to_u64(f[1]));
  g.dx_um = r.to_double(f[2]);
  g.dy_um = r.to_double(f[3]);
  g.amplitudes.reserve(g.nx * g.ny);
  while (r.next(f)) {
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != 2) r.fail("expected 're,im'");
    g.amplitudes.emplace_back(r.to_double(f[0]), r.to_double(f[1]));
  }
  if (g.amplitudes.size() != g.nx * g.ny)
    throw IoError(path + ": expected " + std::to_string(g.nx * g.ny) +
                  " samples, got " + std::to_string(g.amplitudes.size()));
  g.validate();
  return g;
}

void write_field_grid_binary(const FieldGrid& grid, const std::string& path) {
  grid.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kGridMagic, 8);
  const std::uint32_t nx = static_cast<std::uint32_t>(grid.nx);
  const std::uint32_t ny = static_cast<std::uint32_t>(grid.ny);
  out.write(reinterpret_cast<const char*>(&nx), 4);
  out.write(reinterpret_cast<const char*>(&ny), 4);
  out.write(reinterpret_cast<const char*>(&grid.dx_um), 8);
  out.write(reinterpret_cast<const char*>(&grid.dy_um), 8);
  for (const auto& a : grid.amplitudes) {
    const double re = a.real(), im = a.imag();
    out.write(reinterpret_cast<const char*>(&re), 8);
    out.write(reinterpret_cast<const char*>(&im), 8);
  }
  if (!out) throw IoError("write failed: " + path);
}

void write_field_grid_csv(const FieldGrid& grid, const std::string& path) {
  grid.validate();
  CsvWriter w(path);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g,%.9g", grid.nx, grid.ny,
                grid.dx_um, grid.dy_um);
  w.line(buf);
  for (const auto& a : grid.amplitudes) {
    std::snprintf(buf, sizeof buf, "%.12e,%.12e", a.real(), a.imag());
    w.line(buf);
  }
}

void write_far_field_csv(const FarFieldPattern& pattern,
                         const std::string& path) {
  CsvWriter w(path);
  w.line("kx_over_k,ky_over_k,intensity");
  char buf[128];
  for (std::size_t iy = 0; iy < pattern.nky; ++iy) {
    for (std::size_t ix = 0; ix < pattern.nkx; ++ix) {
      const double sx = pattern.kx_over_k[ix];
      const double sy = pattern.ky_over_k[iy];
      if (sx * sx + sy * sy > 1.0) continue;
      std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.12e", sx, sy,
                    pattern.intensity[iy * pattern.nkx + ix]);
      w.line(buf);
    }
  }
}

std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016" PRIx64, h);
  return out;
}

std::uint64_t file_size(const std::string& path) {
  std::error_code ec;
  const auto s = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat: " + path);
  return static_cast<std::uint64_t>(s);
}

}  // namespace qdpost
