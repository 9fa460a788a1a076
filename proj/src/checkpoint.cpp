#include "paag/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace paag {

namespace {

void put_f64(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f64(const std::string& in, std::size_t pos) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i]))
            << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

const Tensor& Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw DataError("checkpoint has no tensor '" + name + "'");
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["tensors"] = nlohmann::json::array();
  std::string payload;
  for (const auto& [name, t] : ckpt.tensors) {
    manifest["tensors"].push_back({{"name", name},
                                   {"shape", t.shape()},
                                   {"dtype", "f64le"},
                                   {"offset", payload.size()}});
    for (double v : t.data()) put_f64(payload, v);
  }
  manifest["meta"] = ckpt.meta;
  const std::string m = manifest.dump();
  std::string out = std::string(kCheckpointMagic) + "\n" +
                    std::to_string(m.size()) + "\n" + m;
  return out + payload;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  const std::string magic = std::string(kCheckpointMagic) + "\n";
  if (bytes.compare(0, magic.size(), magic) != 0)
    throw DataError("not a PAAG1 checkpoint");
  auto nl = bytes.find('\n', magic.size());
  if (nl == std::string::npos) throw DataError("truncated checkpoint header");
  std::size_t mlen = std::stoull(bytes.substr(magic.size(), nl - magic.size()));
  const std::size_t mstart = nl + 1;
  if (mstart + mlen > bytes.size()) throw DataError("truncated checkpoint manifest");
  auto manifest = nlohmann::json::parse(bytes.substr(mstart, mlen));
  const std::size_t base = mstart + mlen;

  Checkpoint ckpt;
  for (const auto& e : manifest.at("tensors")) {
    if (e.at("dtype") != "f64le")
      throw DataError("unsupported dtype " + e.at("dtype").dump());
    Shape shape = e.at("shape").get<Shape>();
    const std::size_t n = shape_numel(shape);
    const std::size_t off = base + e.at("offset").get<std::size_t>();
    if (off + 8 * n > bytes.size())
      throw DataError("tensor '" + e.at("name").get<std::string>() +
                      "' runs past end of checkpoint");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = get_f64(bytes, off + 8 * i);
    ckpt.tensors.emplace_back(e.at("name").get<std::string>(),
                              Tensor::from(std::move(shape), std::move(data)));
  }
  ckpt.meta = manifest.value("meta", nlohmann::json::object());
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  const std::string bytes = encode_checkpoint(ckpt);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace paag
