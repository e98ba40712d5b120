#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include "venom/network.hpp"

namespace venom {
namespace {

void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& os, const float* data, std::size_t count) {
  static_assert(sizeof(float) == 4);
  os.write(reinterpret_cast<const char*>(data),
           static_cast<std::streamsize>(count * 4));
}

struct Reader {
  std::ifstream is;
  std::string path;

  explicit Reader(const std::string& p) : is(p, std::ios::binary), path(p) {
    if (!is) throw IoError("cannot open '" + p + "'");
  }

  void bytes(void* dst, std::size_t n) {
    is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
      throw IoError("'" + path + "': truncated file");
  }

  std::uint16_t u16() {
    unsigned char b[2];
    bytes(b, 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }

  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
};

}  // namespace

void save_checkpoint(const Network& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write '" + path + "'");
  os.write("VNCK", 4);
  put_u32(os, kCheckpointVersion);

  std::uint32_t count = 0;
  for (const auto& l : net.layers)
    if (l.has_params()) count += 2;
  put_u32(os, count);

  auto write_tensor = [&](const std::string& name, const Tensor& t) {
    put_u16(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    os.put(static_cast<char>(t.shape.size()));
    for (int d : t.shape) put_u32(os, static_cast<std::uint32_t>(d));
    put_f32(os, t.data.data(), t.numel());
  };
  for (const auto& l : net.layers) {
    if (!l.has_params()) continue;
    write_tensor(l.spec.name + ".weight", l.weight);
    write_tensor(l.spec.name + ".bias", l.bias);
  }
  if (!os) throw IoError("write failed for '" + path + "'");
}

Network load_checkpoint(const Network& arch, const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "VNCK", 4) != 0)
    throw IoError("'" + path + "': bad magic, not a checkpoint file");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw IoError("'" + path + "': unsupported checkpoint version " +
                  std::to_string(version));
  const std::uint32_t count = r.u32();

  std::map<std::string, std::pair<std::vector<int>, std::vector<float>>> blobs;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = r.u16();
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len);
    unsigned char ndim;
    r.bytes(&ndim, 1);
    std::vector<int> shape(ndim);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<int>(r.u32());
      if (d <= 0) throw IoError("'" + path + "': invalid dimension in '" + name + "'");
      n *= static_cast<std::size_t>(d);
    }
    std::vector<float> data(n);
    r.bytes(data.data(), n * 4);
    blobs[name] = {std::move(shape), std::move(data)};
  }

  Network net = arch;
  std::size_t used = 0;
  for (auto& l : net.layers) {
    if (!l.has_params()) continue;
    for (auto [suffix, t] : {std::pair{".weight", &l.weight}, {".bias", &l.bias}}) {
      auto it = blobs.find(l.spec.name + suffix);
      if (it == blobs.end())
        throw IoError("'" + path + "': missing tensor '" + l.spec.name + suffix + "'");
      if (it->second.first != t->shape)
        throw IoError("'" + path + "': shape mismatch for '" + l.spec.name + suffix +
                      "': file has " + shape_string(it->second.first) + ", expected " +
                      shape_string(t->shape));
      t->data = it->second.second;
      ++used;
    }
  }
  if (used != blobs.size())
    throw IoError("'" + path + "': file contains tensors unknown to this architecture");
  return net;
}

}  // namespace venom
