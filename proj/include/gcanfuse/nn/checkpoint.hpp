#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "../errors.hpp"
#include "parameter.hpp"

namespace gcanfuse::nn {

struct TensorEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;

  friend bool operator==(const TensorEntry&, const TensorEntry&) = default;
};

/// Parameter values in manifest order plus free-form key/value metadata.
struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<TensorEntry> entries;

  std::string meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return v;
    return {};
  }

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline Checkpoint snapshot(const ParamRefs& params) {
  Checkpoint c;
  for (const auto* p : params) {
    TensorEntry e;
    e.name = p->name;
    e.shape = {static_cast<std::size_t>(p->value.rows()),
               static_cast<std::size_t>(p->value.cols())};
    e.values.assign(p->value.data(), p->value.data() + p->value.size());
    c.entries.push_back(std::move(e));
  }
  return c;
}

inline bool same_manifest(const Checkpoint& a, const Checkpoint& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (std::size_t i = 0; i < a.entries.size(); ++i)
    if (a.entries[i].name != b.entries[i].name || a.entries[i].shape != b.entries[i].shape)
      return false;
  return true;
}

inline void restore(const ParamRefs& params, const Checkpoint& c) {
  if (params.size() != c.entries.size())
    throw DataError("checkpoint manifest does not match model parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = c.entries[i];
    Parameter& p = *params[i];
    if (e.name != p.name || e.shape.size() != 2 ||
        e.shape[0] != static_cast<std::size_t>(p.value.rows()) ||
        e.shape[1] != static_cast<std::size_t>(p.value.cols()))
      throw DataError("checkpoint entry mismatch at " + e.name + " (model has " + p.name + ")");
    std::copy(e.values.begin(), e.values.end(), p.value.data());
  }
}

/// Elementwise mean; manifests must be identical.
inline Checkpoint average_checkpoints(const Checkpoint& a, const Checkpoint& b) {
  if (!same_manifest(a, b)) throw DataError("average_checkpoints: manifest mismatch");
  Checkpoint out = a;
  for (std::size_t i = 0; i < out.entries.size(); ++i)
    for (std::size_t k = 0; k < out.entries[i].values.size(); ++k)
      out.entries[i].values[k] = 0.5 * (a.entries[i].values[k] + b.entries[i].values[k]);
  return out;
}

// File layout:
//   GFCKPT1\n
//   meta <key> <value>\n            (zero or more)
//   params <count>\n
//   <name> <ndim> <d1> ... <dn>\n   (count lines)
//   little-endian IEEE-754 float64 values, entries in manifest order
inline void write_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out << "GFCKPT1\n";
  for (const auto& [k, v] : c.meta) out << "meta " << k << ' ' << v << '\n';
  out << "params " << c.entries.size() << '\n';
  for (const auto& e : c.entries) {
    out << e.name << ' ' << e.shape.size();
    for (auto d : e.shape) out << ' ' << d;
    out << '\n';
  }
  for (const auto& e : c.entries)
    for (double v : e.values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      char bytes[8];
      for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
      out.write(bytes, 8);
    }
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path);
  std::string line;
  if (!std::getline(in, line) || line != "GFCKPT1")
    throw DataError(path + ": missing GFCKPT1 magic");
  Checkpoint c;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string k, v;
      ls >> k;
      std::getline(ls >> std::ws, v);
      c.meta.emplace_back(k, v);
    } else if (tag == "params") {
      ls >> count;
      break;
    } else {
      throw DataError(path + ": unexpected header line '" + line + "'");
    }
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw DataError(path + ": truncated manifest");
    std::istringstream ls(line);
    TensorEntry e;
    std::size_t ndim = 0;
    ls >> e.name >> ndim;
    std::size_t n = 1;
    for (std::size_t d = 0; d < ndim; ++d) {
      std::size_t dim;
      ls >> dim;
      e.shape.push_back(dim);
      n *= dim;
    }
    if (!ls) throw DataError(path + ": malformed manifest line '" + line + "'");
    e.values.resize(n);
    c.entries.push_back(std::move(e));
  }
  for (auto& e : c.entries)
    for (double& v : e.values) {
      unsigned char bytes[8];
      if (!in.read(reinterpret_cast<char*>(bytes), 8))
        throw DataError(path + ": truncated tensor data");
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
      std::memcpy(&v, &bits, sizeof v);
    }
  return c;
}

}  // namespace gcanfuse::nn
