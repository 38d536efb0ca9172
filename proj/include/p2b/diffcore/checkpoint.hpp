#pragma once

#include <iosfwd>
#include <string>

#include "p2b/diffcore/nn.hpp"

namespace p2b::diffcore {

// Checkpoint container, format version 1. Layout (all integers and floats
// little-endian):
//   magic   "P2BCKPT\0"
//   u32     format version
//   u32     parameter count
//   per parameter: u32 name length, name bytes, u32 ndim, u32 dims...,
//                  f64 values..., f64 adam.m..., f64 adam.v..., u64 adam.step
//   u32     batch-norm stat count
//   per stat: u32 name length, name bytes, u32 size, f64 mean..., f64 var...,
//             f64 momentum, u8 warmed
//   u32     config string length, config bytes (key=value lines)
constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(std::ostream& os, const ParamStore& store, const std::string& config);
void save_checkpoint(const std::string& path, const ParamStore& store, const std::string& config);

struct Checkpoint {
  ParamStore store;
  std::string config;
};

Checkpoint load_checkpoint(std::istream& is);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace p2b::diffcore
