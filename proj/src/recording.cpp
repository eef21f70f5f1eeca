// SPDX-License-Identifier: Apache-2.0
#include "isac/recording.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

namespace isac {

namespace {
constexpr char kMagic[8] = {'S', 'I', 'S', 'O', 'C', 'H', 'M', '1'};

std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
         std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}
}  // namespace

int ChannelRecording::n_frames() const {
  return frame_len > 0 ? n_symbols_total() / frame_len : 0;
}

ChannelRecording load_recording(const std::string& path, RecordingFormat fmt,
                                int frame_len) {
  if (frame_len < 1) throw std::invalid_argument("recording: frame_len must be >= 1");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("recording: cannot open '" + path + "'", 0);

  ChannelRecording rec;
  rec.frame_len = frame_len;
  if (fmt == RecordingFormat::raw_complex) {
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    if (bytes.size() < 16)
      throw FormatError("recording: truncated header, expected 16 bytes, got " +
                            std::to_string(bytes.size()),
                        std::int64_t(bytes.size()));
    if (std::memcmp(bytes.data(), kMagic, 8) != 0)
      throw FormatError("recording: bad magic, expected SISOCHM1", 0);
    const auto* u = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint32_t n = read_u32(u + 8);
    const std::uint32_t m = read_u32(u + 12);
    if (n == 0) throw FormatError("recording: zero subcarriers", 8);
    if (m == 0) throw FormatError("recording: zero symbols", 12);
    const std::size_t need = 16 + std::size_t(n) * m * 16;
    if (bytes.size() != need)
      throw FormatError("recording: payload size mismatch, expected " +
                            std::to_string(need) + " bytes, got " +
                            std::to_string(bytes.size()),
                        std::int64_t(std::min(bytes.size(), need)));
    rec.data.resize(n, m);
    const char* p = bytes.data() + 16;
    for (std::uint32_t col = 0; col < m; ++col)
      for (std::uint32_t row = 0; row < n; ++row) {
        double re, im;
        std::memcpy(&re, p, 8);
        std::memcpy(&im, p + 8, 8);
        rec.data(row, col) = cplx(re, im);
        p += 16;
      }
    return rec;
  }

  // csv: header line then subcarrier,symbol,re,im rows covering the grid
  std::string line;
  std::int64_t offset = 0;
  if (!std::getline(in, line))
    throw FormatError("recording: empty csv", 0);
  if (line != "subcarrier,symbol,re,im")
    throw FormatError("recording: bad csv header, expected subcarrier,symbol,re,im", 0);
  offset += std::int64_t(line.size()) + 1;
  struct Entry {
    int n, m;
    cplx v;
  };
  std::vector<Entry> entries;
  int max_n = -1, max_m = -1;
  while (std::getline(in, line)) {
    if (line.empty()) {
      offset += 1;
      continue;
    }
    std::istringstream row(line);
    Entry e;
    char c1, c2, c3;
    double re, im;
    if (!(row >> e.n >> c1 >> e.m >> c2 >> re >> c3 >> im) || c1 != ',' ||
        c2 != ',' || c3 != ',' || e.n < 0 || e.m < 0)
      throw FormatError("recording: malformed csv row '" + line + "'", offset);
    e.v = cplx(re, im);
    entries.push_back(e);
    max_n = std::max(max_n, e.n);
    max_m = std::max(max_m, e.m);
    offset += std::int64_t(line.size()) + 1;
  }
  if (entries.empty()) throw FormatError("recording: csv has no data rows", offset);
  const std::size_t cellcount = std::size_t(max_n + 1) * (max_m + 1);
  if (entries.size() != cellcount)
    throw FormatError("recording: csv covers " + std::to_string(entries.size()) +
                          " cells, grid needs " + std::to_string(cellcount),
                      offset);
  rec.data = CMat::Zero(max_n + 1, max_m + 1);
  for (const Entry& e : entries) rec.data(e.n, e.m) = e.v;
  return rec;
}

void save_recording(const ChannelRecording& rec, const std::string& path,
                    RecordingFormat fmt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("recording: cannot write '" + path + "'");
  const int n = rec.n_subcarriers(), m = rec.n_symbols_total();
  if (fmt == RecordingFormat::raw_complex) {
    out.write(kMagic, 8);
    write_u32(out, std::uint32_t(n));
    write_u32(out, std::uint32_t(m));
    for (int col = 0; col < m; ++col)
      for (int row = 0; row < n; ++row) {
        const double re = rec.data(row, col).real();
        const double im = rec.data(row, col).imag();
        out.write(reinterpret_cast<const char*>(&re), 8);
        out.write(reinterpret_cast<const char*>(&im), 8);
      }
  } else {
    out << "subcarrier,symbol,re,im\n";
    out.precision(17);
    for (int col = 0; col < m; ++col)
      for (int row = 0; row < n; ++row)
        out << row << ',' << col << ',' << rec.data(row, col).real() << ','
            << rec.data(row, col).imag() << '\n';
  }
  if (!out) throw std::runtime_error("recording: write failed for '" + path + "'");
}

ChannelRecording background_subtract(const ChannelRecording& rec,
                                     double forgetting,
                                     BackgroundState& state) {
  if (!(forgetting >= 0.0) || !(forgetting < 1.0))
    throw std::invalid_argument("background: forgetting factor outside [0, 1)");
  const int n = rec.n_subcarriers(), len = rec.frame_len;
  if (len < 1) throw std::invalid_argument("background: recording has no frame length");
  if (state.average.size() == 0) state.average = CMat::Zero(n, len);
  if (state.average.rows() != n || state.average.cols() != len)
    throw std::invalid_argument("background: state does not match recording shape");

  ChannelRecording out = rec;
  const int frames = rec.n_frames();
  for (int k = 0; k < frames; ++k) {
    const auto block = rec.data.middleCols(std::int64_t(k) * len, len);
    out.data.middleCols(std::int64_t(k) * len, len) = block - state.average;
    state.average = forgetting * state.average + (1.0 - forgetting) * block;
  }
  // trailing partial frame: cleaned with the latest background, no update
  const int tail = rec.n_symbols_total() - frames * len;
  if (tail > 0)
    out.data.rightCols(tail) -= state.average.leftCols(tail);
  return out;
}

std::vector<Block> block_stream(const ChannelRecording& rec, int block_len,
                                const ResourceSet& block_template) {
  if (block_len < 1) throw std::invalid_argument("blocks: block_len must be >= 1");
  if (block_template.n_subcarriers != rec.n_subcarriers() ||
      block_template.n_symbols != block_len)
    throw std::invalid_argument("blocks: template shape != N x block_len");
  block_template.validate();
  std::vector<Block> blocks;
  const int count = rec.n_symbols_total() / block_len;  // trailing part dropped
  blocks.reserve(count);
  for (int b = 0; b < count; ++b) {
    Block blk;
    blk.index = b;
    blk.values.resize(block_template.size());
    for (int i = 0; i < block_template.size(); ++i)
      blk.values[i] = rec.data(block_template.cells[i].subcarrier,
                               std::int64_t(b) * block_len +
                                   block_template.cells[i].symbol);
    blocks.push_back(std::move(blk));
  }
  return blocks;
}

namespace {
double carousel_omega(const CarouselParams& p) {
  return p.rpm * 2.0 * std::numbers::pi / 60.0;
}

double carousel_delay(const CarouselParams& p, double phase, double t) {
  return p.base_delay_s +
         p.radius_m / p.grid.light_speed *
             std::sin(carousel_omega(p) * t + phase);
}
}  // namespace

ChannelRecording synth_carousel(const CarouselParams& p) {
  if (p.n_symbols_total < 1)
    throw std::invalid_argument("carousel: need at least one symbol");
  if (p.radius_m <= 0.0 || p.base_delay_s < 0.0)
    throw std::invalid_argument("carousel: bad geometry");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const GridConfig& g = p.grid;
  const double phases[2] = {p.phase0_rad, p.phase0_rad + std::numbers::pi};
  const cplx gains[2] = {p.gain0, p.gain1};

  ChannelRecording rec;
  rec.frame_len = g.n_symbols;
  rec.subcarrier_spacing = g.subcarrier_spacing;
  rec.symbol_duration = g.symbol_duration;
  rec.carrier_freq = g.carrier_freq;
  rec.data = CMat::Zero(g.n_subcarriers, p.n_symbols_total);
  for (int m = 0; m < p.n_symbols_total; ++m) {
    const double t = m * g.symbol_duration;
    for (int k = 0; k < 2; ++k) {
      const double tau = carousel_delay(p, phases[k], t);
      for (int n = 0; n < g.n_subcarriers; ++n) {
        const double ph = -two_pi * (g.carrier_freq + n * g.subcarrier_spacing) * tau;
        rec.data(n, m) += gains[k] * cplx(std::cos(ph), std::sin(ph));
      }
    }
    if (std::abs(p.static_gain) > 0.0) {
      for (int n = 0; n < g.n_subcarriers; ++n) {
        const double ph =
            -two_pi * (g.carrier_freq + n * g.subcarrier_spacing) * p.static_delay_s;
        rec.data(n, m) += p.static_gain * cplx(std::cos(ph), std::sin(ph));
      }
    }
  }
  if (p.noise_power > 0.0) {
    std::mt19937_64 rng(p.seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 * p.noise_power));
    for (int m = 0; m < p.n_symbols_total; ++m)
      for (int n = 0; n < g.n_subcarriers; ++n)
        rec.data(n, m) += cplx(gauss(rng), gauss(rng));
  }
  return rec;
}

void save_resources(const ResourceSet& rs, const std::string& path) {
  nlohmann::json j;
  j["n_subcarriers"] = rs.n_subcarriers;
  j["n_symbols"] = rs.n_symbols;
  auto& cells = j["cells"] = nlohmann::json::array();
  for (const Cell& c : rs.cells) cells.push_back({c.subcarrier, c.symbol});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("resources: cannot write '" + path + "'");
  out << j.dump(1) << '\n';
}

ResourceSet load_resources(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("resources: cannot open '" + path + "'", 0);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("resources: bad json: ") + e.what(), 0);
  }
  try {
    std::vector<Cell> cells;
    for (const auto& c : j.at("cells"))
      cells.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
    return ResourceSet::from_cells(j.at("n_subcarriers").get<int>(),
                                   j.at("n_symbols").get<int>(),
                                   std::move(cells));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("resources: bad json: ") + e.what(), 0);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("resources: ") + e.what(), 0);
  }
}

std::array<TargetTruth, 2> carousel_block_truth(const CarouselParams& p,
                                                int block_index,
                                                int block_len) {
  const double t_mid =
      (double(block_index) * block_len + 0.5 * (block_len - 1)) *
      p.grid.symbol_duration;
  const double omega = carousel_omega(p);
  std::array<TargetTruth, 2> out;
  const double phases[2] = {p.phase0_rad, p.phase0_rad + std::numbers::pi};
  const cplx gains[2] = {p.gain0, p.gain1};
  for (int k = 0; k < 2; ++k) {
    out[k].delay = carousel_delay(p, phases[k], t_mid);
    // alpha = -f_c dtau/dt
    out[k].doppler = -p.grid.carrier_freq * p.radius_m / p.grid.light_speed *
                     omega * std::cos(omega * t_mid + phases[k]);
    out[k].gain = gains[k];
  }
  return out;
}

}  // namespace isac
