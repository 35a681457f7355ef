#include "trg/checkpoint.hpp"

#include <cmath>
#include <limits>

#include "binary_io.hpp"

namespace trg {

void write_checkpoint(const std::string& path, const NamedTensors& tensors) {
  io::Writer w(path);
  w.magic("TRGW");
  w.put<std::uint16_t>(kCheckpointVersion);
  for (const auto& [name, t] : tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max())
      throw Error(Error::Kind::InvalidArgument, "tensor name too long: " + name);
    if (t.rank() > std::numeric_limits<std::uint8_t>::max())
      throw Error(Error::Kind::InvalidArgument, "tensor rank too large: " + name);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    std::vector<float> payload(t.data().begin(), t.data().end());
    w.bytes(payload.data(), payload.size() * sizeof(float));
  }
  w.finish();
}

NamedTensors read_checkpoint(const std::string& path) {
  io::Reader r(path);
  r.expect_magic("TRGW");
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion)
    throw Error(Error::Kind::Format, path + ": unsupported checkpoint version " + std::to_string(version));
  NamedTensors out;
  while (!r.at_end()) {
    const auto len = r.get<std::uint16_t>();
    std::string name(len, '\0');
    r.bytes(name.data(), len);
    const auto rank = r.get<std::uint8_t>();
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint32_t>();
    std::vector<float> payload(numel(shape));
    r.bytes(payload.data(), payload.size() * sizeof(float));
    std::vector<double> values(payload.begin(), payload.end());
    for (double v : values)
      if (!std::isfinite(v)) throw Error(Error::Kind::Numeric, path + ": non-finite value in " + name);
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return out;
}

}  // namespace trg
