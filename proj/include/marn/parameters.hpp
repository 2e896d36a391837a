#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "marn/autodiff.hpp"
#include "marn/tensor.hpp"

namespace marn {

// Ordered collection of named learnable arrays. Order is the declaration order
// and fixes both the optimizer layout and the checkpoint byte layout.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  Tensor& operator[](std::string_view name);
  const Tensor& operator[](std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  std::size_t size() const noexcept { return entries_.size(); }
  Entry& entry(std::size_t i) { return entries_[i]; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::vector<Tensor*> pointers();
  std::vector<Shape> shapes() const;
  std::size_t scalar_count() const;

  // Name of the first array holding a NaN or infinity, empty when all are finite.
  std::string first_non_finite() const;

  // Puts every array on the tape as a leaf, in declaration order.
  std::vector<Var> bind(Tape& tape, bool requires_grad) const;

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::vector<Entry> entries_;
};

// Uniform init in [-s, s], s = 1/sqrt(fan_in).
Tensor uniform_init(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

// MARNC checkpoint container: magic "MARNC", version u32, block count u32, then
// per block: name (u32 length + UTF-8), rank u32, extents u32 each, binary32 payload.
namespace checkpoint {

inline constexpr std::uint32_t kVersion = 1;

std::vector<char> serialize(const ParameterSet& params);
ParameterSet deserialize(std::span<const char> bytes, const std::string& source);
void save(const std::filesystem::path& path, const ParameterSet& params);
ParameterSet load(const std::filesystem::path& path);

// FNV-1a over the serialized block payload (everything after the block count).
std::uint64_t digest(const ParameterSet& params);

// Rounds every value through binary32, matching what a save/load cycle yields.
void round_to_f32(ParameterSet& params);

}  // namespace checkpoint
}  // namespace marn
