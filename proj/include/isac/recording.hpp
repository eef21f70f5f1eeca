// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "isac/grid.hpp"
#include "isac/scene.hpp"

namespace isac {

/// Malformed input file. byte_offset points at the violating position.
struct FormatError : std::runtime_error {
  FormatError(const std::string& what, std::int64_t offset)
      : std::runtime_error(what), byte_offset(offset) {}
  std::int64_t byte_offset = 0;
};

/// Long channel capture: N subcarriers by M_total symbols, column-major by
/// symbol. frame_len groups symbols for the background recursion.
struct ChannelRecording {
  CMat data;  // N x M_total
  int frame_len = 0;
  double subcarrier_spacing = 0.0;
  double symbol_duration = 0.0;
  double carrier_freq = 0.0;

  int n_subcarriers() const { return static_cast<int>(data.rows()); }
  int n_symbols_total() const { return static_cast<int>(data.cols()); }
  int n_frames() const;
};

enum class RecordingFormat { raw_complex, csv };

ChannelRecording load_recording(const std::string& path, RecordingFormat fmt,
                                int frame_len);
void save_recording(const ChannelRecording& rec, const std::string& path,
                    RecordingFormat fmt);

struct BackgroundState {
  CMat average;  // N x frame_len running mean, zero before the first frame
};

/// Exponential moving-average clutter removal: per frame k,
///   out_k = H_k - B_{k-1},  B_k = lambda B_{k-1} + (1 - lambda) H_k.
/// Returns the cleaned recording; state carries across calls.
ChannelRecording background_subtract(const ChannelRecording& rec,
                                     double forgetting,
                                     BackgroundState& state);

struct Block {
  int index = 0;
  CVec values;  // ordered like the block resource template
};

/// Cuts non-overlapping block_len-symbol blocks and compresses each through
/// the same occupied template (defined on an N x block_len grid). A trailing
/// partial block is dropped.
std::vector<Block> block_stream(const ChannelRecording& rec, int block_len,
                                const ResourceSet& block_template);

/// Two scatterers on a rotating arm, opposite phases, plus an optional
/// static path. Delay tau_k(t) = base + (radius/c) sin(omega t + phi_k),
/// Doppler alpha_k(t) = -f_c dtau/dt.
struct CarouselParams {
  GridConfig grid;          // n_symbols is ignored, n_symbols_total rules
  int n_symbols_total = 0;
  double radius_m = 2.0;
  double rpm = 20.0;
  double base_delay_s = 0.0;
  double phase0_rad = 0.0;
  cplx gain0 = {1.0, 0.0};
  cplx gain1 = {1.0, 0.0};
  cplx static_gain = {0.0, 0.0};   // zero disables the static path
  double static_delay_s = 0.0;
  double noise_power = 0.0;
  std::uint64_t seed = 1;
};

ChannelRecording synth_carousel(const CarouselParams& p);

/// Analytic mid-block truth for the two moving scatterers.
std::array<TargetTruth, 2> carousel_block_truth(const CarouselParams& p,
                                                int block_index,
                                                int block_len);

// Occupied-set JSON files: {"n_subcarriers", "n_symbols", "cells": [[n,m],..]}.
void save_resources(const ResourceSet& rs, const std::string& path);
ResourceSet load_resources(const std::string& path);

}  // namespace isac
