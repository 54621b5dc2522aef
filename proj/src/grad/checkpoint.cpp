#include "osc/grad/checkpoint.hpp"

#include "osc/errors.hpp"
#include "osc/io.hpp"

namespace osc::grad {

void save_checkpoint(const std::filesystem::path& path, const Mlp& mlp, const nlohmann::json& extra) {
  nlohmann::json header;
  header["format"] = "osc-mlp";
  header["format_version"] = kCheckpointVersion;
  header["layer_sizes"] = mlp.layer_sizes();
  header["hidden_activation"] = "relu";
  header["output_activation"] = activation_name(mlp.output_activation());
  header["parameter_count"] = mlp.scalar_count();
  header["extra"] = extra;
  std::vector<char> payload;
  for (const Array& p : mlp.parameters()) io::append_doubles(payload, p.data(), p.size());
  io::write_framed(path, header, payload);
}

Mlp load_checkpoint(const std::filesystem::path& path, nlohmann::json* extra) {
  const io::FramedFile file = io::read_framed(path);
  const auto& h = file.header;
  try {
    if (h.value("format", "") != "osc-mlp") throw FormatError(path.string() + ": not an MLP checkpoint");
    if (h.value("format_version", -1) != kCheckpointVersion) {
      throw FormatError(path.string() + ": unsupported checkpoint version");
    }
    const auto sizes = h.at("layer_sizes").get<std::vector<std::size_t>>();
    if (sizes.size() < 2) throw FormatError(path.string() + ": bad layer sizes");
    std::vector<Array> params;
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      if (sizes[l] == 0 || sizes[l + 1] == 0) throw FormatError(path.string() + ": zero layer size");
      params.emplace_back(Shape{sizes[l], sizes[l + 1]}, io::take_doubles(file.payload, offset, sizes[l] * sizes[l + 1]));
      params.emplace_back(Shape{1, sizes[l + 1]}, io::take_doubles(file.payload, offset, sizes[l + 1]));
    }
    if (offset != file.payload.size()) throw FormatError(path.string() + ": trailing bytes after parameters");
    if (extra) *extra = h.value("extra", nlohmann::json::object());
    return Mlp(sizes, parse_activation(h.at("output_activation").get<std::string>()), std::move(params));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const DimensionError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace osc::grad
