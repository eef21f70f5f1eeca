// SPDX-License-Identifier: Apache-2.0
// Recording replay chain: file round-trips with byte-offset errors,
// exponential background subtraction, block segmentation, and the rotating
// two-target emulation tracked block-by-block through the detector.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "isac/detector.hpp"
#include "isac/grid.hpp"
#include "isac/recording.hpp"

using namespace isac;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("isac_pipeline_" + name))
      .string();
}

void write_bytes(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), std::streamsize(bytes.size()));
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

ChannelRecording random_recording(int n, int m, int frame_len,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ChannelRecording rec;
  rec.frame_len = frame_len;
  rec.data.resize(n, m);
  for (int col = 0; col < m; ++col)
    for (int row = 0; row < n; ++row)
      rec.data(row, col) = cplx(gauss(rng), gauss(rng));
  return rec;
}

double cells_err_delay(const GridConfig& g, double a, double b) {
  return std::abs(wrap_delay_diff(g, a - b)) / g.delay_cell();
}
double cells_err_doppler(const GridConfig& g, double a, double b) {
  return std::abs(wrap_doppler_diff(g, a - b)) / g.doppler_cell();
}

bool truth_matched(const GridConfig& g, const std::vector<Detection>& dets,
                   const TargetTruth& t, double gate) {
  for (const Detection& d : dets)
    if (cells_err_delay(g, d.delay, t.delay) < gate &&
        cells_err_doppler(g, d.doppler, t.doppler) < gate)
      return true;
  return false;
}

}  // namespace

TEST_CASE("raw recording round-trips bit-identically") {
  const ChannelRecording rec = random_recording(16, 32, 8, 42);
  const std::string path = tmp_path("roundtrip.chm");
  save_recording(rec, path, RecordingFormat::raw_complex);
  const ChannelRecording back =
      load_recording(path, RecordingFormat::raw_complex, 8);
  REQUIRE(back.n_subcarriers() == 16);
  REQUIRE(back.n_symbols_total() == 32);
  CHECK(back.frame_len == 8);
  CHECK(back.n_frames() == 4);
  for (int m = 0; m < 32; ++m)
    for (int n = 0; n < 16; ++n) {
      CHECK(back.data(n, m).real() == rec.data(n, m).real());
      CHECK(back.data(n, m).imag() == rec.data(n, m).imag());
    }
}

TEST_CASE("csv and raw encodings of the same matrix load equal") {
  const ChannelRecording rec = random_recording(9, 11, 11, 7);
  const std::string raw = tmp_path("cross.chm");
  const std::string csv = tmp_path("cross.csv");
  save_recording(rec, raw, RecordingFormat::raw_complex);
  save_recording(rec, csv, RecordingFormat::csv);
  const ChannelRecording a = load_recording(raw, RecordingFormat::raw_complex, 11);
  const ChannelRecording b = load_recording(csv, RecordingFormat::csv, 11);
  REQUIRE(a.data.rows() == b.data.rows());
  REQUIRE(a.data.cols() == b.data.cols());
  const double scale = a.data.norm();
  CHECK((a.data - b.data).norm() <= 1e-15 * scale);
}

TEST_CASE("raw loader reports malformed files with byte offsets") {
  const char magic[8] = {'S', 'I', 'S', 'O', 'C', 'H', 'M', '1'};

  SUBCASE("truncated header names expected vs actual length") {
    const std::string path = tmp_path("short.chm");
    write_bytes(path, std::vector<char>(10, 'x'));
    try {
      load_recording(path, RecordingFormat::raw_complex, 1);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset == 10);
      CHECK(std::string(e.what()).find("16") != std::string::npos);
      CHECK(std::string(e.what()).find("10") != std::string::npos);
    }
  }

  SUBCASE("bad magic points at the file start") {
    const std::string path = tmp_path("magic.chm");
    write_bytes(path, std::vector<char>(24, 'Z'));
    try {
      load_recording(path, RecordingFormat::raw_complex, 1);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset == 0);
    }
  }

  SUBCASE("zero dimensions point at the offending field") {
    for (int zero_field : {0, 1}) {
      std::vector<char> bytes(magic, magic + 8);
      const std::uint32_t n = zero_field == 0 ? 0u : 5u;
      const std::uint32_t m = zero_field == 0 ? 5u : 0u;
      for (std::uint32_t v : {n, m})
        for (int i = 0; i < 4; ++i)
          bytes.push_back(char((v >> (8 * i)) & 0xff));
      const std::string path = tmp_path("zero.chm");
      write_bytes(path, bytes);
      try {
        load_recording(path, RecordingFormat::raw_complex, 1);
        FAIL("expected FormatError");
      } catch (const FormatError& e) {
        CHECK(e.byte_offset == (zero_field == 0 ? 8 : 12));
      }
    }
  }

  SUBCASE("payload size mismatch names expected vs actual byte counts") {
    std::vector<char> bytes(magic, magic + 8);
    for (std::uint32_t v : {2u, 2u})
      for (int i = 0; i < 4; ++i)
        bytes.push_back(char((v >> (8 * i)) & 0xff));
    bytes.resize(bytes.size() + 3 * 16, 0);  // 3 of the 4 required values
    const std::string path = tmp_path("mismatch.chm");
    write_bytes(path, bytes);
    try {
      load_recording(path, RecordingFormat::raw_complex, 1);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset == 64);
      CHECK(std::string(e.what()).find("80") != std::string::npos);
      CHECK(std::string(e.what()).find("64") != std::string::npos);
    }
  }

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_recording(tmp_path("absent.chm"),
                                   RecordingFormat::raw_complex, 1),
                    FormatError);
  }
}

TEST_CASE("csv loader reports malformed files with byte offsets") {
  SUBCASE("empty file and bad header point at offset zero") {
    const std::string path = tmp_path("empty.csv");
    write_text(path, "");
    try {
      load_recording(path, RecordingFormat::csv, 1);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset == 0);
    }
    write_text(path, "n,m,re,im\n0,0,1,0\n");
    try {
      load_recording(path, RecordingFormat::csv, 1);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset == 0);
    }
  }

  SUBCASE("malformed row points at its first byte") {
    const std::string path = tmp_path("badrow.csv");
    write_text(path, "subcarrier,symbol,re,im\n0,0,1,0\n0,1,oops,0\n");
    try {
      load_recording(path, RecordingFormat::csv, 1);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset == 32);  // header (24) plus first row (8)
    }
  }

  SUBCASE("header without data rows") {
    const std::string path = tmp_path("norows.csv");
    write_text(path, "subcarrier,symbol,re,im\n");
    try {
      load_recording(path, RecordingFormat::csv, 1);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset == 24);
    }
  }

  SUBCASE("incomplete grid coverage is rejected") {
    const std::string path = tmp_path("gaps.csv");
    write_text(path, "subcarrier,symbol,re,im\n0,0,1,0\n1,1,2,0\n");
    try {
      load_recording(path, RecordingFormat::csv, 1);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("2") != std::string::npos);
      CHECK(std::string(e.what()).find("4") != std::string::npos);
    }
  }
}

TEST_CASE("background subtraction: static decay, zero input, validation") {
  const int n = 6, len = 4, frames = 10;
  const double lambda = 0.9;

  SUBCASE("constant input decays geometrically at the forgetting rate") {
    ChannelRecording rec = random_recording(n, len, len, 3);
    const CMat frame = rec.data;
    rec.data.resize(n, len * frames);
    for (int k = 0; k < frames; ++k) rec.data.middleCols(k * len, len) = frame;
    BackgroundState st;
    const ChannelRecording out = background_subtract(rec, lambda, st);
    for (int k = 0; k < frames; ++k) {
      const CMat got = out.data.middleCols(k * len, len);
      const CMat want = std::pow(lambda, k) * frame;
      CHECK((got - want).norm() <= 1e-12 * frame.norm());
    }
  }

  SUBCASE("zero input stays zero, state stays zero") {
    ChannelRecording rec;
    rec.frame_len = len;
    rec.data = CMat::Zero(n, len * 3);
    BackgroundState st;
    const ChannelRecording out = background_subtract(rec, lambda, st);
    CHECK(out.data.norm() == 0.0);
    CHECK(st.average.norm() == 0.0);
  }

  SUBCASE("forgetting factor outside [0, 1) is rejected") {
    ChannelRecording rec = random_recording(n, len, len, 5);
    BackgroundState st;
    CHECK_THROWS_AS(background_subtract(rec, -0.1, st), std::invalid_argument);
    CHECK_THROWS_AS(background_subtract(rec, 1.0, st), std::invalid_argument);
    BackgroundState mismatched;
    mismatched.average = CMat::Zero(n + 1, len);
    CHECK_THROWS_AS(background_subtract(rec, 0.5, mismatched),
                    std::invalid_argument);
  }
}

TEST_CASE("background subtraction separates static clutter from movers") {
  const int n = 8, len = 8, frames = 50;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 1.0);
  CVec s(n), v(n);
  for (int i = 0; i < n; ++i) {
    s[i] = cplx(gauss(rng), gauss(rng));
    v[i] = cplx(gauss(rng), gauss(rng));
  }
  ChannelRecording stat, mov;
  stat.frame_len = mov.frame_len = len;
  stat.data.resize(n, len * frames);
  mov.data.resize(n, len * frames);
  const double phase_step = 2.2;  // per-symbol Doppler rotation, off-harmonic
  for (int m = 0; m < len * frames; ++m) {
    stat.data.col(m) = s;
    mov.data.col(m) = v * std::exp(cplx(0.0, phase_step * m));
  }
  BackgroundState st_s, st_m;
  const ChannelRecording out_s = background_subtract(stat, 0.9, st_s);
  const ChannelRecording out_m = background_subtract(mov, 0.9, st_m);
  const double e_static =
      out_s.data.middleCols((frames - 1) * len, len).squaredNorm();
  const double e_moving =
      out_m.data.middleCols((frames - 1) * len, len).squaredNorm();
  CHECK(e_static < 0.01 * e_moving);
}

TEST_CASE("background subtraction is linear and chunk-invariant") {
  const int n = 6, len = 4;
  const ChannelRecording h1 = random_recording(n, len * 3, len, 21);
  const ChannelRecording h2 = random_recording(n, len * 3, len, 22);

  SUBCASE("linearity over identical state trajectories") {
    const cplx a(0.6, -1.1), b(-0.4, 0.2);
    ChannelRecording mix = h1;
    mix.data = a * h1.data + b * h2.data;
    BackgroundState st_mix, st_1, st_2;
    const ChannelRecording out_mix = background_subtract(mix, 0.8, st_mix);
    const ChannelRecording out_1 = background_subtract(h1, 0.8, st_1);
    const ChannelRecording out_2 = background_subtract(h2, 0.8, st_2);
    const CMat want = a * out_1.data + b * out_2.data;
    CHECK((out_mix.data - want).norm() <= 1e-12 * want.norm());
  }

  SUBCASE("two chunked calls match one call when split on a frame boundary") {
    ChannelRecording whole = h1;
    ChannelRecording first = h1, second = h1;
    first.data = h1.data.leftCols(len * 2);
    second.data = h1.data.rightCols(len);
    BackgroundState st_whole, st_parts;
    const ChannelRecording out_whole = background_subtract(whole, 0.7, st_whole);
    const ChannelRecording out_a = background_subtract(first, 0.7, st_parts);
    const ChannelRecording out_b = background_subtract(second, 0.7, st_parts);
    CHECK((out_whole.data.leftCols(len * 2) - out_a.data).norm() == 0.0);
    CHECK((out_whole.data.rightCols(len) - out_b.data).norm() == 0.0);
    CHECK((st_whole.average - st_parts.average).norm() == 0.0);
  }

  SUBCASE("trailing partial frame is cleaned but does not advance the state") {
    ChannelRecording rec = random_recording(n, len * 3 + 2, len, 23);
    BackgroundState st;
    const ChannelRecording out = background_subtract(rec, 0.6, st);
    BackgroundState ref;
    ChannelRecording full = rec;
    full.data = rec.data.leftCols(len * 3);
    background_subtract(full, 0.6, ref);
    CHECK((st.average - ref.average).norm() == 0.0);
    const CMat tail_want =
        rec.data.rightCols(2) - ref.average.leftCols(2);
    CHECK((out.data.rightCols(2) - tail_want).norm() == 0.0);
  }
}

TEST_CASE("block_stream counts, template checks, and exact round-trips") {
  const int n = 8, block = 200;
  const ChannelRecording rec = random_recording(n, 650, block, 31);

  SUBCASE("600-symbol span yields 3 blocks, trailing partial dropped") {
    std::vector<Cell> all;
    for (int m = 0; m < block; ++m)
      for (int s = 0; s < n; ++s) all.push_back({s, m});
    const ResourceSet full = ResourceSet::from_cells(n, block, all);
    const std::vector<Block> blocks = block_stream(rec, block, full);
    REQUIRE(blocks.size() == 3);  // 650 symbols, 50 dropped
    for (int b = 0; b < 3; ++b) {
      CHECK(blocks[b].index == b);
      const CMat back = scatter(blocks[b].values, full);
      CHECK((back - rec.data.middleCols(b * block, block)).norm() == 0.0);
    }
  }

  SUBCASE("sparse template compresses every block through the same cells") {
    ResourceSelection sel;
    sel.mode = ResourceMode::elementwise;
    sel.occupancy = 0.25;
    const GridConfig g = GridConfig::make(n, block, 30e3, 35.677083e-6, 5.9e9);
    const ResourceSet rs = select_resources(g, sel, 77);
    const std::vector<Block> blocks = block_stream(rec, block, rs);
    REQUIRE(blocks.size() == 3);
    for (const Block& blk : blocks) {
      REQUIRE(blk.values.size() == rs.size());
      CHECK((compress(scatter(blk.values, rs), rs) - blk.values).norm() == 0.0);
      for (int i = 0; i < rs.size(); ++i)
        CHECK(blk.values[i] ==
              rec.data(rs.cells[i].subcarrier,
                       blk.index * block + rs.cells[i].symbol));
    }
  }

  SUBCASE("too-short recording yields an empty stream") {
    const ChannelRecording tiny = random_recording(n, 199, 199, 32);
    std::vector<Cell> all;
    for (int m = 0; m < block; ++m)
      for (int s = 0; s < n; ++s) all.push_back({s, m});
    const ResourceSet full = ResourceSet::from_cells(n, block, all);
    CHECK(block_stream(tiny, block, full).empty());
  }

  SUBCASE("template shape must match N x block_len") {
    const ResourceSet wrong = ResourceSet::from_cells(n, 100, {{0, 0}});
    CHECK_THROWS_AS(block_stream(rec, block, wrong), std::invalid_argument);
    const ResourceSet wrong_n = ResourceSet::from_cells(n + 1, block, {{0, 0}});
    CHECK_THROWS_AS(block_stream(rec, block, wrong_n), std::invalid_argument);
  }
}

TEST_CASE("carousel truth: Doppler equals the carrier-scaled delay rate") {
  CarouselParams p;
  p.grid = GridConfig::make(32, 32, 30e3, 35.677083e-6, 5.9e9);
  p.n_symbols_total = 32 * 40;
  p.radius_m = 40.0;
  p.rpm = 30.0;
  p.base_delay_s = 1.2e-5;
  p.phase0_rad = 0.4;
  const int block = 32;
  const double dt = block * p.grid.symbol_duration;
  for (int b = 1; b < 39; ++b) {
    const auto prev = carousel_block_truth(p, b - 1, block);
    const auto here = carousel_block_truth(p, b, block);
    const auto next = carousel_block_truth(p, b + 1, block);
    for (int k = 0; k < 2; ++k) {
      const double rate = (next[k].delay - prev[k].delay) / (2.0 * dt);
      const double want = -p.grid.carrier_freq * rate;
      CHECK(here[k].doppler == doctest::Approx(want).epsilon(1e-4));
    }
  }
  CHECK_THROWS_AS(
      [] {
        CarouselParams bad;
        bad.grid = GridConfig::make(8, 8, 30e3, 35.677083e-6, 5.9e9);
        bad.n_symbols_total = 0;
        return synth_carousel(bad);
      }(),
      std::invalid_argument);
}

TEST_CASE("carousel blocks through the detector follow the trajectory") {
  const GridConfig g = GridConfig::make(32, 32, 30e3, 35.677083e-6, 5.9e9);
  CarouselParams p;
  p.grid = g;
  p.n_symbols_total = 26 * 32 + 13;  // 26 blocks plus a dropped tail
  p.radius_m = 40.0;
  p.rpm = 30.0;
  p.base_delay_s = 12.3 * g.delay_cell();
  p.phase0_rad = 0.4;
  p.gain0 = cplx(1.0, 0.0);
  p.gain1 = 0.9 * std::exp(cplx(0.0, 0.7));
  p.noise_power = 1e-3;
  p.seed = 17;
  const ChannelRecording rec = synth_carousel(p);
  REQUIRE(rec.frame_len == 32);

  ResourceSelection sel;
  sel.mode = ResourceMode::elementwise;
  sel.occupancy = 0.2;
  const ResourceSet rs = select_resources(g, sel, 91);

  DetectorConfig det;
  det.oversampling = 4;
  det.false_alarm_prob = 1e-3;
  det.max_detections = 4;

  const std::vector<Block> blocks = block_stream(rec, 32, rs);
  REQUIRE(blocks.size() == 26);
  for (const Block& blk : blocks) {
    const DetectionResult r = nomp_detect(blk.values, g, rs, det);
    const auto truth = carousel_block_truth(p, blk.index, 32);
    CHECK(truth_matched(g, r.detections, truth[0], 0.1));
    CHECK(truth_matched(g, r.detections, truth[1], 0.1));
  }
}

TEST_CASE("resource files round-trip and reject malformed JSON") {
  const GridConfig g = GridConfig::make(16, 12, 30e3, 35.677083e-6, 5.9e9);
  ResourceSelection sel;
  sel.mode = ResourceMode::elementwise;
  sel.occupancy = 0.3;
  const ResourceSet rs = select_resources(g, sel, 13);
  const std::string path = tmp_path("cells.json");
  save_resources(rs, path);
  const ResourceSet back = load_resources(path);
  REQUIRE(back.n_subcarriers == rs.n_subcarriers);
  REQUIRE(back.n_symbols == rs.n_symbols);
  REQUIRE(back.cells.size() == rs.cells.size());
  for (std::size_t i = 0; i < rs.cells.size(); ++i) {
    CHECK(back.cells[i].subcarrier == rs.cells[i].subcarrier);
    CHECK(back.cells[i].symbol == rs.cells[i].symbol);
  }

  CHECK_THROWS_AS(load_resources(tmp_path("absent.json")), FormatError);
  write_text(path, "{nope");
  CHECK_THROWS_AS(load_resources(path), FormatError);
  write_text(path, R"({"n_subcarriers": 4, "n_symbols": 4})");
  CHECK_THROWS_AS(load_resources(path), FormatError);
  write_text(path,
             R"({"n_subcarriers": 4, "n_symbols": 4, "cells": [[9, 0]]})");
  CHECK_THROWS_AS(load_resources(path), FormatError);
  write_text(
      path,
      R"({"n_subcarriers": 4, "n_symbols": 4, "cells": [[1, 1], [1, 1]]})");
  CHECK_THROWS_AS(load_resources(path), FormatError);
}
