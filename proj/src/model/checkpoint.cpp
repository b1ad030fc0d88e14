#include "anonact/model/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "anonact/binary_io.hpp"
#include "anonact/errors.hpp"

namespace anonact::model {

namespace {
constexpr std::array<char, 8> kMagic = {'A', 'N', 'O', 'N', 'A', 'C', 'T', 'M'};
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic.data(), kMagic.size());
  binary::write_le<std::uint32_t>(out, kCheckpointVersion);
  const auto& c = model.config();
  for (std::uint64_t v : {std::uint64_t(c.vocab_size), std::uint64_t(c.d_model),
                          std::uint64_t(c.n_layers), std::uint64_t(c.n_heads),
                          std::uint64_t(c.context_len), c.seed}) {
    binary::write_le<std::uint64_t>(out, v);
  }
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.params().size()));
  for (const auto& p : model.params()) {
    binary::write_string(out, p.name);
    binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t dim : p.value.shape()) binary::write_le<std::uint64_t>(out, dim);
    binary::write_floats(out, p.value.values());
  }
  if (!out) throw ArgumentError("failed writing checkpoint: " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError("not a model checkpoint (bad magic): " + path.string());
  }
  const auto version = binary::read_le<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  c.vocab_size = binary::read_le<std::uint64_t>(in, "config");
  c.d_model = binary::read_le<std::uint64_t>(in, "config");
  c.n_layers = binary::read_le<std::uint64_t>(in, "config");
  c.n_heads = binary::read_le<std::uint64_t>(in, "config");
  c.context_len = binary::read_le<std::uint64_t>(in, "config");
  c.seed = binary::read_le<std::uint64_t>(in, "config");
  try {
    c.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("invalid config block: ") + e.what());
  }

  const auto layout = parameter_layout(c);
  const auto count = binary::read_le<std::uint32_t>(in, "tensor count");
  if (count != layout.size()) throw FormatError("tensor count does not match config layout");
  nn::ParamStore<float> params;
  for (const auto& [expected_name, expected_shape] : layout) {
    std::string name = binary::read_string(in, 256, "tensor name");
    const auto rank = binary::read_le<std::uint32_t>(in, "tensor rank");
    if (name != expected_name || rank != expected_shape.size()) {
      throw FormatError("unexpected tensor " + name + " (expected " + expected_name + ")");
    }
    std::vector<std::size_t> shape(rank);
    for (auto& dim : shape) dim = binary::read_le<std::uint64_t>(in, "tensor dims");
    if (shape != expected_shape) throw FormatError("tensor " + name + " has unexpected shape");
    std::size_t n = 1;
    for (auto dim : shape) n *= dim;
    params.add(name, nn::Tensor<float>(shape, binary::read_floats(in, n, "tensor data")));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after checkpoint tensors");
  }
  return Model(c, std::move(params));
}

}  // namespace anonact::model
