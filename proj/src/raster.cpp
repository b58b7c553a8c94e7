#include "lulcseg/raster.hpp"

#include <bit>
#include <fstream>
#include <set>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "bsq payloads are little-endian; big-endian hosts need a swap");

namespace lulcseg {

using json = nlohmann::ordered_json;

std::string dtype_name(Dtype dt) { return dt == Dtype::u8 ? "u8" : "u16"; }

Dtype dtype_from_name(const std::string& name) {
  if (name == "u8") return Dtype::u8;
  if (name == "u16") return Dtype::u16;
  fail(Errc::UnsupportedDtype, "dtype must be u8 or u16, got '" + name + "'");
}

void ClassPalette::validate() const {
  require(!entries.empty(), Errc::InvalidArgument, "palette is empty");
  std::set<std::string> names;
  for (size_t i = 0; i < entries.size(); ++i) {
    require(entries[i].id == static_cast<int>(i), Errc::InvalidArgument,
            "palette class IDs must be contiguous from 0");
    require(names.insert(entries[i].name).second, Errc::InvalidArgument,
            "duplicate palette name '" + entries[i].name + "'");
  }
  require(entries[0].name == "No data", Errc::InvalidArgument,
          "class 0 must be 'No data'");
}

ClassPalette ClassPalette::nalcms17() {
  ClassPalette p;
  p.entries = {
      {0, "No data", {0, 0, 0}},
      {1, "Temperate or sub-polar needleleaf forest", {0, 61, 0}},
      {2, "Sub-polar taiga needleleaf forest", {148, 156, 112}},
      {3, "Temperate or sub-polar broadleaf deciduous forest", {20, 140, 61}},
      {4, "Mixed forest", {92, 117, 43}},
      {5, "Temperate or sub-polar shrubland", {179, 138, 51}},
      {6, "Temperate or sub-polar grassland", {225, 207, 138}},
      {7, "Sub-polar or polar shrubland-lichen-moss", {156, 117, 84}},
      {8, "Sub-polar or polar grassland-lichen-moss", {186, 212, 143}},
      {9, "Sub-polar or polar barren-lichen-moss", {64, 138, 112}},
      {10, "Wetland", {107, 163, 138}},
      {11, "Cropland", {230, 174, 102}},
      {12, "Barren land", {168, 171, 174}},
      {13, "Urban and built-up", {220, 33, 38}},
      {14, "Water", {76, 112, 163}},
      {15, "Snow and ice", {255, 250, 255}},
      {16, "Cloud", {255, 255, 204}},
  };
  return p;
}

ClassPalette ClassPalette::synthetic(int classes) {
  require(classes >= 2, Errc::InvalidArgument,
          "synthetic palette needs at least 2 classes");
  static const std::array<std::array<uint8_t, 3>, 8> colors = {{
      {0, 0, 0},
      {76, 112, 163},
      {0, 61, 0},
      {230, 174, 102},
      {220, 33, 38},
      {225, 207, 138},
      {107, 163, 138},
      {255, 255, 204},
  }};
  ClassPalette p;
  p.entries.push_back({0, "No data", colors[0]});
  for (int i = 1; i < classes; ++i) {
    p.entries.push_back(
        {i, "Class " + std::to_string(i), colors[i % colors.size()]});
  }
  return p;
}

void RasterHeader::validate() const {
  require(width >= 1 && height >= 1 && bands >= 1, Errc::InvalidArgument,
          "raster dims must be >= 1");
  if (nodata) {
    require(*nodata <= dtype_max(dtype), Errc::SampleOutOfRange,
            "nodata value " + std::to_string(*nodata) +
                " not representable in " + dtype_name(dtype));
  }
  if (!band_names.empty()) {
    require(static_cast<int>(band_names.size()) == bands,
            Errc::InvalidArgument, "band_names count != bands");
  }
}

void Raster::validate() const {
  header.validate();
  require(samples.size() == header.sample_count(), Errc::PayloadSizeMismatch,
          "sample count != width*height*bands");
  const uint32_t vmax = dtype_max(header.dtype);
  for (uint16_t s : samples) {
    require(s <= vmax, Errc::SampleOutOfRange,
            "sample exceeds " + dtype_name(header.dtype) + " range");
  }
}

void LabelMap::validate() const {
  require(width >= 1 && height >= 1, Errc::InvalidArgument,
          "label map dims must be >= 1");
  require(labels.size() == static_cast<size_t>(width) * height,
          Errc::PayloadSizeMismatch, "label count != width*height");
  palette.validate();
  const int classes = palette.size();
  for (uint8_t l : labels) {
    require(l < classes, Errc::LabelOutOfRange,
            "label " + std::to_string(l) + " >= palette size " +
                std::to_string(classes));
  }
}

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p += ".json";
  return p;
}

json palette_to_json(const ClassPalette& palette) {
  json arr = json::array();
  for (const auto& e : palette.entries) {
    arr.push_back({{"id", e.id},
                   {"name", e.name},
                   {"color", {e.color[0], e.color[1], e.color[2]}}});
  }
  return arr;
}

ClassPalette palette_from_json(const json& arr) {
  ClassPalette p;
  for (const auto& e : arr) {
    PaletteEntry entry;
    entry.id = e.at("id").get<int>();
    entry.name = e.at("name").get<std::string>();
    const auto& c = e.at("color");
    entry.color = {c.at(0).get<uint8_t>(), c.at(1).get<uint8_t>(),
                   c.at(2).get<uint8_t>()};
    p.entries.push_back(entry);
  }
  p.validate();
  return p;
}

struct SidecarData {
  RasterHeader header;
  std::optional<ClassPalette> palette;
};

SidecarData read_sidecar(const std::filesystem::path& path) {
  const auto side = sidecar_path(path);
  std::ifstream in(side);
  require(in.good(), Errc::MissingHeader,
          "sidecar header not found: " + side.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(Errc::MissingHeader, "sidecar header unparseable: " + side.string() +
                                  " (" + e.what() + ")");
  }
  SidecarData data;
  try {
    data.header.width = j.at("width").get<int>();
    data.header.height = j.at("height").get<int>();
    data.header.bands = j.at("bands").get<int>();
    data.header.dtype = dtype_from_name(j.at("dtype").get<std::string>());
    if (j.contains("nodata") && !j.at("nodata").is_null()) {
      data.header.nodata = j.at("nodata").get<uint32_t>();
    }
    if (j.contains("band_names") && !j.at("band_names").is_null()) {
      data.header.band_names =
          j.at("band_names").get<std::vector<std::string>>();
    }
    if (j.contains("palette")) {
      data.palette = palette_from_json(j.at("palette"));
    }
  } catch (const json::exception& e) {
    fail(Errc::MissingHeader,
         "sidecar header missing fields: " + std::string(e.what()));
  }
  data.header.validate();
  return data;
}

void write_sidecar(const std::filesystem::path& path,
                   const RasterHeader& header, const ClassPalette* palette) {
  json j;
  j["width"] = header.width;
  j["height"] = header.height;
  j["bands"] = header.bands;
  j["dtype"] = dtype_name(header.dtype);
  j["nodata"] = header.nodata ? json(*header.nodata) : json(nullptr);
  if (!header.band_names.empty()) j["band_names"] = header.band_names;
  if (palette) j["palette"] = palette_to_json(*palette);
  std::ofstream out(sidecar_path(path));
  require(out.good(), Errc::IoFailure,
          "cannot write sidecar: " + sidecar_path(path).string());
  out << j.dump(2) << "\n";
  require(out.good(), Errc::IoFailure,
          "failed writing sidecar: " + sidecar_path(path).string());
}

std::vector<uint16_t> read_payload(const std::filesystem::path& path,
                                   const RasterHeader& header) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::IoFailure, "cannot open payload: " + path.string());
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<size_t>(in.tellg());
  in.seekg(0, std::ios::beg);

  const size_t count = header.sample_count();
  const size_t expected = count * dtype_bytes(header.dtype);
  require(file_size == expected, Errc::PayloadSizeMismatch,
          "payload holds " + std::to_string(file_size) +
              " bytes, header implies " + std::to_string(expected));

  std::vector<uint16_t> samples(count);
  if (header.dtype == Dtype::u8) {
    std::vector<uint8_t> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), expected);
    require(in.good(), Errc::IoFailure, "short read: " + path.string());
    for (size_t i = 0; i < count; ++i) samples[i] = raw[i];
  } else {
    in.read(reinterpret_cast<char*>(samples.data()), expected);
    require(in.good(), Errc::IoFailure, "short read: " + path.string());
  }
  return samples;
}

void write_payload(const std::filesystem::path& path, const Raster& raster) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Errc::IoFailure, "cannot write payload: " + path.string());
  const size_t count = raster.samples.size();
  if (raster.header.dtype == Dtype::u8) {
    std::vector<uint8_t> raw(count);
    for (size_t i = 0; i < count; ++i)
      raw[i] = static_cast<uint8_t>(raster.samples[i]);
    out.write(reinterpret_cast<const char*>(raw.data()), count);
  } else {
    out.write(reinterpret_cast<const char*>(raster.samples.data()), count * 2);
  }
  require(out.good(), Errc::IoFailure, "failed writing payload: " + path.string());
}

}  // namespace

Raster load_raster(const std::filesystem::path& path) {
  const SidecarData side = read_sidecar(path);
  Raster raster;
  raster.header = side.header;
  raster.samples = read_payload(path, side.header);
  raster.validate();
  return raster;
}

void save_raster(const Raster& raster, const std::filesystem::path& path) {
  raster.validate();
  write_payload(path, raster);
  write_sidecar(path, raster.header, nullptr);
}

LabelMap load_label_map(const std::filesystem::path& path) {
  const SidecarData side = read_sidecar(path);
  require(side.header.bands == 1, Errc::DimensionMismatch,
          "label map must have bands=1");
  require(side.header.dtype == Dtype::u8, Errc::UnsupportedDtype,
          "label map payload must be u8");
  require(side.palette.has_value(), Errc::MissingHeader,
          "label map sidecar lacks a palette");
  const auto samples = read_payload(path, side.header);
  LabelMap map;
  map.width = side.header.width;
  map.height = side.header.height;
  map.palette = *side.palette;
  map.labels.resize(samples.size());
  for (size_t i = 0; i < samples.size(); ++i)
    map.labels[i] = static_cast<uint8_t>(samples[i]);
  map.validate();
  return map;
}

void save_label_map(const LabelMap& map, const std::filesystem::path& path) {
  map.validate();
  Raster as_raster;
  as_raster.header.width = map.width;
  as_raster.header.height = map.height;
  as_raster.header.bands = 1;
  as_raster.header.dtype = Dtype::u8;
  as_raster.header.nodata = 0;
  as_raster.samples.assign(map.labels.begin(), map.labels.end());
  write_payload(path, as_raster);
  write_sidecar(path, as_raster.header, &map.palette);
}

std::vector<uint16_t> extract_band(const Raster& raster, int band_index) {
  require(band_index >= 0 && band_index < raster.header.bands,
          Errc::BandOutOfRange,
          "band " + std::to_string(band_index) + " of " +
              std::to_string(raster.header.bands));
  const size_t plane = static_cast<size_t>(raster.header.width) *
                       raster.header.height;
  const auto begin = raster.samples.begin() + band_index * plane;
  return std::vector<uint16_t>(begin, begin + plane);
}

}  // namespace lulcseg
