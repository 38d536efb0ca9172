#include "p2b/diffcore/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace p2b::diffcore {

namespace {

const char kMagic[8] = {'P', '2', 'B', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void write_pod(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("checkpoint: truncated stream");
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  const auto n = read_pod<std::uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw DataError("checkpoint: truncated string");
  return s;
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::istream& is, std::vector<double>& v) {
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!is) throw DataError("checkpoint: truncated payload");
}

}  // namespace

void save_checkpoint(std::ostream& os, const ParamStore& store, const std::string& config) {
  os.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(os, kCheckpointVersion);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(store.params.size()));
  for (const auto& [name, p] : store.params) {
    write_string(os, name);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.shape.size()));
    for (int d : p.shape) write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    write_doubles(os, p.values);
    auto it = store.adam.find(name);
    if (it != store.adam.end() && it->second.m.numel() == p.numel()) {
      write_doubles(os, it->second.m.values);
      write_doubles(os, it->second.v.values);
      write_pod<std::uint64_t>(os, it->second.step);
    } else {
      std::vector<double> zeros(p.numel(), 0.0);
      write_doubles(os, zeros);
      write_doubles(os, zeros);
      write_pod<std::uint64_t>(os, 0);
    }
  }
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(store.bn.size()));
  for (const auto& [name, st] : store.bn) {
    write_string(os, name);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(st.mean.size()));
    write_doubles(os, st.mean);
    write_doubles(os, st.var);
    write_pod<double>(os, st.momentum);
    write_pod<std::uint8_t>(os, st.warmed ? 1 : 0);
  }
  write_string(os, config);
  if (!os) throw DataError("checkpoint: write failed");
}

void save_checkpoint(const std::string& path, const ParamStore& store, const std::string& config) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("checkpoint: cannot open " + path + " for writing");
  save_checkpoint(f, store, config);
}

Checkpoint load_checkpoint(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw DataError("checkpoint: bad magic");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw DataError("checkpoint: unsupported format version " + std::to_string(version));

  Checkpoint ck;
  const auto nparams = read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nparams; ++i) {
    const std::string name = read_string(is);
    const auto ndim = read_pod<std::uint32_t>(is);
    Shape shape(ndim);
    for (auto& d : shape) d = static_cast<int>(read_pod<std::uint32_t>(is));
    Array p(shape);
    read_doubles(is, p.values);
    AdamState st;
    st.m = Array(shape);
    st.v = Array(shape);
    read_doubles(is, st.m.values);
    read_doubles(is, st.v.values);
    st.step = read_pod<std::uint64_t>(is);
    ck.store.add(name, std::move(p));
    ck.store.adam.emplace(name, std::move(st));
  }
  const auto nbn = read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nbn; ++i) {
    const std::string name = read_string(is);
    const auto size = read_pod<std::uint32_t>(is);
    BnStats st;
    st.mean.resize(size);
    st.var.resize(size);
    read_doubles(is, st.mean);
    read_doubles(is, st.var);
    st.momentum = read_pod<double>(is);
    st.warmed = read_pod<std::uint8_t>(is) != 0;
    ck.store.bn.emplace(name, std::move(st));
  }
  ck.config = read_string(is);
  return ck;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("checkpoint: cannot open " + path);
  return load_checkpoint(f);
}

}  // namespace p2b::diffcore
