#include "cmet/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "cmet/errors.hpp"

namespace cmet {

using nlohmann::json;

namespace {

constexpr uint32_t kFormatVersion = 1;

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((unsigned char)((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<unsigned char>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back((unsigned char)((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const unsigned char* p) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= (uint32_t)p[i] << (8 * i);
  return v;
}

uint64_t get_u64(const unsigned char* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= (uint64_t)p[i] << (8 * i);
  return v;
}

void append_f32(std::vector<unsigned char>& out, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

float read_f32(const unsigned char* p) {
  const uint32_t bits = get_u32(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

void append_f64(std::vector<unsigned char>& out, double f) {
  uint64_t bits;
  std::memcpy(&bits, &f, 8);
  put_u64(out, bits);
}

double read_f64(const unsigned char* p) {
  const uint64_t bits = get_u64(p);
  double f;
  std::memcpy(&f, &bits, 8);
  return f;
}

void write_envelope(const std::string& path, const char magic[4], const json& manifest,
                    const std::vector<unsigned char>& payload) {
  const std::string mtext = manifest.dump();
  std::vector<unsigned char> head;
  head.insert(head.end(), magic, magic + 4);
  put_u32(head, kFormatVersion);
  put_u64(head, (uint64_t)mtext.size());

  const auto dir = std::filesystem::path(path).parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write '" + path + "'");
  out.write((const char*)head.data(), (std::streamsize)head.size());
  out.write(mtext.data(), (std::streamsize)mtext.size());
  if (!payload.empty()) out.write((const char*)payload.data(), (std::streamsize)payload.size());
  out.flush();
  if (!out) throw io_error("write failed for '" + path + "'");
}

struct Envelope {
  json manifest;
  std::vector<unsigned char> payload;
};

Envelope read_envelope(const std::string& path, const char magic[4], const char* kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(std::string("cannot open ") + kind + " file '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16) throw parse_error(std::string(kind) + " file '" + path + "' is truncated");
  if (std::memcmp(bytes.data(), magic, 4) != 0)
    throw parse_error(std::string("bad magic in ") + kind + " file '" + path + "'");
  const uint32_t ver = get_u32(bytes.data() + 4);
  if (ver != kFormatVersion)
    throw parse_error(std::string(kind) + " file '" + path + "' has unsupported version " + std::to_string(ver));
  const uint64_t mlen = get_u64(bytes.data() + 8);
  if (16 + mlen > bytes.size())
    throw parse_error(std::string(kind) + " file '" + path + "': manifest extends past end of file");
  Envelope env;
  try {
    env.manifest = json::parse(bytes.begin() + 16, bytes.begin() + 16 + (size_t)mlen);
  } catch (const json::exception& e) {
    throw parse_error(std::string(kind) + " manifest in '" + path + "': " + e.what());
  }
  env.payload.assign(bytes.begin() + 16 + (size_t)mlen, bytes.end());
  return env;
}

template <class T>
T field(const json& j, const char* key, const char* ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw parse_error(std::string(ctx) + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw parse_error(std::string(ctx) + ": bad field '" + key + "': " + e.what());
  }
}

json blob_to_json(const BlobEntry& e) {
  return json{{"name", e.name}, {"shape", e.shape}, {"off", e.off}, {"len", e.len}};
}

BlobEntry blob_from_json(const json& j, const char* ctx) {
  BlobEntry e;
  e.name = field<std::string>(j, "name", ctx);
  e.shape = field<Shape>(j, "shape", ctx);
  e.off = field<uint64_t>(j, "off", ctx);
  e.len = field<uint64_t>(j, "len", ctx);
  return e;
}

std::string hex_u64(uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", (unsigned long long)v);
  return buf;
}

uint64_t parse_hex_u64(const std::string& s, const char* ctx) {
  unsigned long long v = 0;
  if (std::sscanf(s.c_str(), "0x%llx", &v) != 1)
    throw parse_error(std::string(ctx) + ": bad hex value '" + s + "'");
  return v;
}

}  // namespace

void write_dataset(const EmbeddingDataset& ds, const std::string& path) {
  std::vector<unsigned char> payload;
  json jsamples = json::array();
  for (const auto& s : ds.samples) {
    const uint64_t audio_off = payload.size();
    for (float f : s.audio) append_f32(payload, f);
    const uint64_t audio_len = payload.size() - audio_off;
    const uint64_t vis_off = payload.size();
    for (float f : s.clip) append_f32(payload, f);
    const uint64_t vis_len = payload.size() - vis_off;
    jsamples.push_back(json{{"identity", s.identity},
                            {"emotion", s.emotion},
                            {"clip_id", s.clip_id},
                            {"audio", {{"off", audio_off}, {"len", audio_len}}},
                            {"visual", {{"off", vis_off}, {"len", vis_len}}}});
  }
  json manifest{{"version", kFormatVersion}, {"d_a", ds.d_a},       {"d_v", ds.d_v},
                {"T", ds.T},                 {"emotions", ds.emotions}, {"identities", ds.identities},
                {"provenance", ds.provenance}, {"samples", jsamples}};
  write_envelope(path, "CMED", manifest, payload);
}

EmbeddingDataset read_dataset(const std::string& path) {
  Envelope env = read_envelope(path, "CMED", "dataset");
  const json& m = env.manifest;
  const char* ctx = "dataset manifest";
  EmbeddingDataset ds;
  ds.d_a = field<int>(m, "d_a", ctx);
  ds.d_v = field<int>(m, "d_v", ctx);
  ds.T = field<int>(m, "T", ctx);
  ds.emotions = field<std::vector<std::string>>(m, "emotions", ctx);
  ds.identities = field<std::vector<std::string>>(m, "identities", ctx);
  ds.provenance = field<std::string>(m, "provenance", ctx);
  if (ds.d_a < 1 || ds.d_v < 1 || ds.T < 1) throw parse_error("dataset manifest: non-positive dimensions");

  auto it = m.find("samples");
  if (it == m.end() || !it->is_array()) throw parse_error("dataset manifest: missing samples array");
  for (const auto& js : *it) {
    Sample s;
    s.identity = field<int>(js, "identity", ctx);
    s.emotion = field<int>(js, "emotion", ctx);
    s.clip_id = field<std::string>(js, "clip_id", ctx);
    const json ja = field<json>(js, "audio", ctx);
    const json jv = field<json>(js, "visual", ctx);
    const uint64_t aoff = field<uint64_t>(ja, "off", ctx), alen = field<uint64_t>(ja, "len", ctx);
    const uint64_t voff = field<uint64_t>(jv, "off", ctx), vlen = field<uint64_t>(jv, "len", ctx);
    if (alen != (uint64_t)ds.d_a * 4)
      throw parse_error("sample '" + s.clip_id + "': audio payload length " + std::to_string(alen) +
                        " inconsistent with d_a " + std::to_string(ds.d_a));
    if (vlen != (uint64_t)ds.T * ds.d_v * 4)
      throw parse_error("sample '" + s.clip_id + "': visual payload length " + std::to_string(vlen) +
                        " inconsistent with T*d_v");
    if (aoff + alen > env.payload.size() || voff + vlen > env.payload.size())
      throw parse_error("sample '" + s.clip_id + "': payload truncated (declared region past end)");
    s.audio.resize(ds.d_a);
    for (int i = 0; i < ds.d_a; ++i) s.audio[i] = read_f32(env.payload.data() + aoff + 4 * (size_t)i);
    s.clip.resize((size_t)ds.T * ds.d_v);
    for (size_t i = 0; i < s.clip.size(); ++i) s.clip[i] = read_f32(env.payload.data() + voff + 4 * i);
    ds.samples.push_back(std::move(s));
  }
  ds.validate();
  ds.build_index();
  return ds;
}

template <class S>
BlobEntry Checkpoint::append_blob(const std::string& name, const Tensor<S>& t) {
  BlobEntry e;
  e.name = name;
  e.shape = t.shape;
  e.off = payload.size();
  if (precision == "float32")
    for (S v : t.data) append_f32(payload, (float)v);
  else
    for (S v : t.data) append_f64(payload, (double)v);
  e.len = payload.size() - e.off;
  return e;
}

template <class S>
Tensor<S> Checkpoint::fetch(const BlobEntry& e) const {
  Tensor<S> t(e.shape);
  const size_t bytes_per = precision == "float32" ? 4 : 8;
  if (e.len != t.numel() * bytes_per)
    throw parse_error("checkpoint blob '" + e.name + "': length " + std::to_string(e.len) +
                      " inconsistent with shape " + shape_str(e.shape));
  if (e.off + e.len > payload.size())
    throw parse_error("checkpoint blob '" + e.name + "': payload truncated");
  for (size_t i = 0; i < t.numel(); ++i) {
    if (bytes_per == 4)
      t.data[i] = (S)read_f32(payload.data() + e.off + 4 * i);
    else
      t.data[i] = (S)read_f64(payload.data() + e.off + 8 * i);
  }
  return t;
}

template BlobEntry Checkpoint::append_blob<float>(const std::string&, const Tensor<float>&);
template BlobEntry Checkpoint::append_blob<double>(const std::string&, const Tensor<double>&);
template Tensor<float> Checkpoint::fetch<float>(const BlobEntry&) const;
template Tensor<double> Checkpoint::fetch<double>(const BlobEntry&) const;

void write_checkpoint(const Checkpoint& ck, const std::string& path) {
  json jp = json::array(), jm = json::array(), jv = json::array();
  for (const auto& e : ck.params) jp.push_back(blob_to_json(e));
  for (const auto& e : ck.adam_m) jm.push_back(blob_to_json(e));
  for (const auto& e : ck.adam_v) jv.push_back(blob_to_json(e));
  json manifest{{"version", kFormatVersion},
                {"step", ck.step},
                {"adam_step", ck.adam_step},
                {"precision", ck.precision},
                {"rng_state", json::array({hex_u64(ck.rng_state[0]), hex_u64(ck.rng_state[1]),
                                           hex_u64(ck.rng_state[2]), hex_u64(ck.rng_state[3])})},
                {"config", ck.config},
                {"params", jp},
                {"adam_m", jm},
                {"adam_v", jv}};
  write_envelope(path, "CMCK", manifest, ck.payload);
}

Checkpoint read_checkpoint(const std::string& path) {
  Envelope env = read_envelope(path, "CMCK", "checkpoint");
  const json& m = env.manifest;
  const char* ctx = "checkpoint manifest";
  Checkpoint ck;
  ck.step = field<long long>(m, "step", ctx);
  ck.adam_step = field<long long>(m, "adam_step", ctx);
  ck.precision = field<std::string>(m, "precision", ctx);
  if (ck.precision != "float32" && ck.precision != "float64")
    throw parse_error("checkpoint manifest: unknown precision '" + ck.precision + "'");
  const auto rs = field<std::vector<std::string>>(m, "rng_state", ctx);
  if (rs.size() != 4) throw parse_error("checkpoint manifest: rng_state must have 4 words");
  for (int i = 0; i < 4; ++i) ck.rng_state[i] = parse_hex_u64(rs[i], ctx);
  ck.config = field<json>(m, "config", ctx);
  for (const auto& j : field<json>(m, "params", ctx)) ck.params.push_back(blob_from_json(j, ctx));
  for (const auto& j : field<json>(m, "adam_m", ctx)) ck.adam_m.push_back(blob_from_json(j, ctx));
  for (const auto& j : field<json>(m, "adam_v", ctx)) ck.adam_v.push_back(blob_from_json(j, ctx));
  ck.payload = std::move(env.payload);
  return ck;
}

}  // namespace cmet
