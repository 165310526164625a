#include "lstp/tensor/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace lstp::tensor {

namespace {

constexpr char kMagic[8] = {'L', 'S', 'T', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

std::size_t element_size(Precision p) { return p == Precision::kF32 ? 4 : 8; }

const char* precision_tag(Precision p) { return p == Precision::kF32 ? "f32" : "f64"; }

template <typename U>
void put_le(std::vector<std::byte>& out, U value) {
  std::byte buf[sizeof(U)];
  std::memcpy(buf, &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
  out.insert(out.end(), buf, buf + sizeof(U));
}

template <typename U>
U get_le(const std::byte* src) {
  std::byte buf[sizeof(U)];
  std::memcpy(buf, src, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
  U value;
  std::memcpy(&value, buf, sizeof(U));
  return value;
}

void check_token(const std::string& s, const char* what) {
  if (s.empty()) throw ContractError(std::string("checkpoint: empty ") + what);
  for (char c : s) {
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
      throw ContractError(std::string("checkpoint: whitespace in ") + what + " '" + s + "'");
    }
  }
}

}  // namespace

template <typename T>
CheckpointEntry CheckpointEntry::from_array(std::string name, const Array<T>& array) {
  CheckpointEntry e;
  e.name = std::move(name);
  e.shape = array.shape();
  e.precision = precision_of<T>();
  e.bytes.reserve(array.size() * sizeof(T));
  for (T x : array.data()) put_le(e.bytes, x);
  return e;
}

template <typename T>
Array<T> CheckpointEntry::to_array() const {
  const std::size_t n = shape_size(shape);
  const std::size_t es = element_size(precision);
  if (bytes.size() != n * es) throw LoadError("checkpoint entry '" + name + "' has wrong byte length");
  std::vector<T> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = precision == Precision::kF32 ? static_cast<T>(get_le<float>(bytes.data() + i * es))
                                           : static_cast<T>(get_le<double>(bytes.data() + i * es));
  }
  try {
    return Array<T>(shape, std::move(data));
  } catch (const Error& e) {
    throw LoadError("checkpoint entry '" + name + "': " + e.what());
  }
}

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

const CheckpointEntry& Checkpoint::at(const std::string& name) const {
  const auto* e = find(name);
  if (!e) throw LoadError("checkpoint has no array '" + name + "'");
  return *e;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ostringstream manifest;
  for (const auto& [key, value] : ckpt.meta) {
    check_token(key, "meta key");
    if (value.find('\n') != std::string::npos) throw ContractError("checkpoint: newline in meta value");
    manifest << "meta " << key << ' ' << value << '\n';
  }
  std::uint64_t offset = 0;
  for (const auto& e : ckpt.entries) {
    check_token(e.name, "array name");
    manifest << "array " << e.name << ' ' << precision_tag(e.precision) << ' ' << e.shape.size();
    for (auto d : e.shape) manifest << ' ' << d;
    manifest << ' ' << offset << ' ' << e.bytes.size() << '\n';
    offset += e.bytes.size();
  }
  const std::string text = manifest.str();

  std::vector<std::byte> header;
  header.insert(header.end(), reinterpret_cast<const std::byte*>(kMagic),
                reinterpret_cast<const std::byte*>(kMagic) + sizeof(kMagic));
  put_le<std::uint32_t>(header, kVersion);
  put_le<std::uint64_t>(header, text.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot open checkpoint for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& e : ckpt.entries) {
    out.write(reinterpret_cast<const char*>(e.bytes.data()), static_cast<std::streamsize>(e.bytes.size()));
  }
  if (!out) throw LoadError("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint: " + path.string());
  const std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> blob(raw.size());
  std::memcpy(blob.data(), raw.data(), raw.size());
  constexpr std::size_t kHeader = sizeof(kMagic) + 4 + 8;
  if (blob.size() < kHeader || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
    throw LoadError("not a checkpoint file: " + path.string());
  }
  const auto version = get_le<std::uint32_t>(blob.data() + 8);
  if (version != kVersion) throw LoadError("unsupported checkpoint version " + std::to_string(version));
  const auto manifest_len = get_le<std::uint64_t>(blob.data() + 12);
  if (kHeader + manifest_len > blob.size()) throw LoadError("truncated checkpoint manifest");
  const std::string text(reinterpret_cast<const char*>(blob.data() + kHeader), manifest_len);
  const std::size_t data_start = kHeader + manifest_len;

  Checkpoint ckpt;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value[0] == ' ') value.erase(0, 1);
      ckpt.meta[key] = value;
    } else if (kind == "array") {
      CheckpointEntry e;
      std::string tag;
      std::size_t rank = 0;
      ls >> e.name >> tag >> rank;
      if (tag == "f32") {
        e.precision = Precision::kF32;
      } else if (tag == "f64") {
        e.precision = Precision::kF64;
      } else {
        throw LoadError("unknown precision '" + tag + "' in checkpoint");
      }
      e.shape.resize(rank);
      for (auto& d : e.shape) ls >> d;
      std::uint64_t offset = 0, nbytes = 0;
      ls >> offset >> nbytes;
      if (!ls) throw LoadError("malformed manifest line: " + line);
      if (nbytes != shape_size(e.shape) * element_size(e.precision) ||
          data_start + offset + nbytes > blob.size()) {
        throw LoadError("checkpoint array '" + e.name + "' out of bounds");
      }
      const auto* begin = blob.data() + data_start + offset;
      e.bytes.assign(begin, begin + nbytes);
      ckpt.entries.push_back(std::move(e));
    } else {
      throw LoadError("malformed manifest line: " + line);
    }
  }
  return ckpt;
}

template <typename T>
void append_params(Checkpoint& ckpt, const ParamStore<T>& params, const std::string& prefix) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.entries.push_back(CheckpointEntry::from_array(prefix + params.name(i), params[i]));
  }
}

template <typename T>
void load_params(const Checkpoint& ckpt, ParamStore<T>& params, const std::string& prefix) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = ckpt.at(prefix + params.name(i));
    if (e.shape != params[i].shape()) {
      throw LoadError("parameter '" + params.name(i) + "' has shape " + shape_string(e.shape) +
                      " in checkpoint but " + shape_string(params[i].shape()) + " in model");
    }
    params[i] = e.template to_array<T>();
  }
}

template <typename T>
void append_adam(Checkpoint& ckpt, const Adam<T>& adam, const ParamStore<T>& params) {
  ckpt.meta["adam.t"] = std::to_string(adam.steps());
  std::ostringstream os;
  os.precision(17);
  const auto& c = adam.config();
  os << c.lr << ' ' << c.beta1 << ' ' << c.beta2 << ' ' << c.eps;
  ckpt.meta["adam.hyper"] = os.str();
  const auto& m = adam.first_moment();
  const auto& v = adam.second_moment();
  for (std::size_t i = 0; i < m.size(); ++i) {
    ckpt.entries.push_back(CheckpointEntry::from_array("adam.m/" + params.name(i), m[i]));
    ckpt.entries.push_back(CheckpointEntry::from_array("adam.v/" + params.name(i), v[i]));
  }
}

template <typename T>
void load_adam(const Checkpoint& ckpt, Adam<T>& adam, const ParamStore<T>& params) {
  auto it = ckpt.meta.find("adam.t");
  if (it == ckpt.meta.end()) throw LoadError("checkpoint has no optimizer state");
  const std::int64_t t = std::stoll(it->second);
  if (auto h = ckpt.meta.find("adam.hyper"); h != ckpt.meta.end()) {
    std::istringstream is(h->second);
    auto& c = adam.config();
    is >> c.lr >> c.beta1 >> c.beta2 >> c.eps;
  }
  std::vector<Array<T>> m, v;
  if (t > 0) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m.push_back(ckpt.at("adam.m/" + params.name(i)).template to_array<T>());
      v.push_back(ckpt.at("adam.v/" + params.name(i)).template to_array<T>());
      if (m.back().shape() != params[i].shape() || v.back().shape() != params[i].shape()) {
        throw LoadError("optimizer state shape mismatch for '" + params.name(i) + "'");
      }
    }
  }
  adam.restore(t, std::move(m), std::move(v));
}

template CheckpointEntry CheckpointEntry::from_array<float>(std::string, const Array<float>&);
template CheckpointEntry CheckpointEntry::from_array<double>(std::string, const Array<double>&);
template Array<float> CheckpointEntry::to_array<float>() const;
template Array<double> CheckpointEntry::to_array<double>() const;
template void append_params<float>(Checkpoint&, const ParamStore<float>&, const std::string&);
template void append_params<double>(Checkpoint&, const ParamStore<double>&, const std::string&);
template void load_params<float>(const Checkpoint&, ParamStore<float>&, const std::string&);
template void load_params<double>(const Checkpoint&, ParamStore<double>&, const std::string&);
template void append_adam<float>(Checkpoint&, const Adam<float>&, const ParamStore<float>&);
template void append_adam<double>(Checkpoint&, const Adam<double>&, const ParamStore<double>&);
template void load_adam<float>(const Checkpoint&, Adam<float>&, const ParamStore<float>&);
template void load_adam<double>(const Checkpoint&, Adam<double>&, const ParamStore<double>&);

}  // namespace lstp::tensor
