#include "xmd/checkpoint.hpp"

#include <limits>

#include "xmd/binary_io.hpp"
#include "xmd/error.hpp"

namespace xmd {

std::string encode_checkpoint(const ParamSet& params) {
  ByteWriter w;
  w.put_bytes(kCheckpointMagic);
  for (const auto& [name, p] : params) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw ConfigError("parameter name too long: " + name);
    const Tensor& t = p.value;
    if (t.rank() > std::numeric_limits<std::uint8_t>::max()) throw ConfigError("rank too large for " + name);
    w.put_u16(static_cast<std::uint16_t>(name.size()));
    w.put_bytes(name);
    w.put_u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) w.put_u32(static_cast<std::uint32_t>(d));
    for (double v : t.data()) w.put_f64(v);
  }
  return w.take();
}

ParamSet decode_checkpoint(std::string_view bytes) {
  ByteReader r(bytes, "checkpoint");
  const auto magic = r.get_bytes(kCheckpointMagic.size());
  if (magic != kCheckpointMagic) {
    throw FormatError("bad checkpoint magic, expected \"" + std::string(kCheckpointMagic) + "\"", 0);
  }
  ParamSet params;
  while (!r.at_end()) {
    const std::size_t entry_offset = r.offset();
    const std::uint16_t name_len = r.get_u16();
    std::string name(r.get_bytes(name_len));
    const std::uint8_t rank = r.get_u8();
    Shape shape(rank);
    for (auto& d : shape) d = r.get_u32();
    const std::size_t n = shape_size(shape);
    if (n > r.remaining() / 8) {
      throw FormatError("truncated checkpoint: parameter " + name + " needs " + std::to_string(n) + " values",
                        r.offset());
    }
    std::vector<double> data(n);
    for (double& v : data) v = r.get_f64();
    if (params.contains(name)) throw FormatError("duplicate parameter " + name + " in checkpoint", entry_offset);
    params.add(name, Tensor(std::move(shape), std::move(data)));
  }
  return params;
}

void save_checkpoint(const ParamSet& params, const std::string& path) { write_file(path, encode_checkpoint(params)); }

ParamSet load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

}  // namespace xmd
