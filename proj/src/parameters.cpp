#include "marn/parameters.hpp"

#include <cmath>

#include "marn/binary_io.hpp"
#include "marn/error.hpp"

namespace marn {

void ParameterSet::add(std::string name, Tensor value) {
  if (contains(name)) throw ContractViolation("duplicate parameter name " + name);
  entries_.push_back(Entry{std::move(name), std::move(value)});
}

bool ParameterSet::contains(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

std::size_t ParameterSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  throw DataError("no parameter named " + std::string(name));
}

Tensor& ParameterSet::operator[](std::string_view name) { return entries_[index_of(name)].value; }
const Tensor& ParameterSet::operator[](std::string_view name) const { return entries_[index_of(name)].value; }

std::vector<Tensor*> ParameterSet::pointers() {
  std::vector<Tensor*> out;
  for (auto& e : entries_) out.push_back(&e.value);
  return out;
}

std::vector<Shape> ParameterSet::shapes() const {
  std::vector<Shape> out;
  for (const auto& e : entries_) out.push_back(e.value.shape());
  return out;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

std::string ParameterSet::first_non_finite() const {
  for (const auto& e : entries_)
    if (!e.value.all_finite()) return e.name;
  return {};
}

std::vector<Var> ParameterSet::bind(Tape& tape, bool requires_grad) const {
  std::vector<Var> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(tape.leaf(e.value, requires_grad));
  return out;
}

Tensor uniform_init(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-s, s);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

namespace checkpoint {

namespace {

constexpr std::string_view kMagic = "MARNC";

void write_blocks(io::ByteWriter& w, const ParameterSet& params) {
  for (const auto& e : params) {
    w.string(e.name);
    w.u32(static_cast<std::uint32_t>(e.value.rank()));
    for (auto extent : e.value.shape()) w.u32(static_cast<std::uint32_t>(extent));
    w.f32_run(e.value.data());
  }
}

}  // namespace

std::vector<char> serialize(const ParameterSet& params) {
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(params.size()));
  write_blocks(w, params);
  return w.buffer();
}

ParameterSet deserialize(std::span<const char> bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  if (bytes.size() < kMagic.size() || r.bytes(kMagic.size(), "magic") != kMagic)
    throw FormatError(source + ": not a MARNC checkpoint (bad magic)");
  const auto version = r.u32("version");
  if (version != kVersion) throw FormatError(source + ": unsupported MARNC version " + std::to_string(version));
  const auto count = r.u32("block count");
  ParameterSet params;
  for (std::uint32_t b = 0; b < count; ++b) {
    std::string name = r.string("block name");
    const auto rank = r.u32("block rank");
    if (rank > 8) throw FormatError(source + ": block " + name + " has implausible rank " + std::to_string(rank));
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto extent = r.u32("block extent");
      if (extent == 0) throw FormatError(source + ": block " + name + " has a zero extent");
      shape.push_back(extent);
    }
    auto values = r.f32_run(shape_size(shape), "block payload");
    params.add(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (r.remaining() != 0) throw CorruptionError(source + ": trailing bytes after last block", r.offset());
  return params;
}

void save(const std::filesystem::path& path, const ParameterSet& params) {
  io::write_file(path, serialize(params));
}

ParameterSet load(const std::filesystem::path& path) { return deserialize(io::read_file(path), path.string()); }

std::uint64_t digest(const ParameterSet& params) {
  io::ByteWriter w;
  write_blocks(w, params);
  return io::fnv1a64(w.buffer());
}

void round_to_f32(ParameterSet& params) {
  for (auto& e : params)
    for (double& v : e.value.data()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace checkpoint
}  // namespace marn
