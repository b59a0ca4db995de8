#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../errors.hpp"
#include "../image.hpp"

namespace gcanfuse {

/// mis plus the four sub-labels in [shm, ste, obj, vio] order.
struct LabelVector {
  int mis = 0;
  std::array<int, 4> sub{0, 0, 0, 0};

  bool valid() const {
    auto binary = [](int v) { return v == 0 || v == 1; };
    if (!binary(mis)) return false;
    for (int s : sub)
      if (!binary(s) || (mis == 0 && s != 0)) return false;
    return true;
  }
  friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

struct RawSample {
  std::string id;
  std::string ocr_text;
  std::vector<std::string> captions;
  RgbImage image;
  LabelVector labels;
};

inline constexpr const char* kDatasetHeader =
    "id\tocr_text\tcaptions\tmis\tshm\tste\tobj\tvio";
inline constexpr const char* kDatasetFile = "data.tsv";
inline constexpr const char* kImageDir = "images";

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string flatten_field(std::string s) {
  for (char& c : s)
    if (c == '\t' || c == '\n' || c == '\r' || c == '|') c = ' ';
  return s;
}

}  // namespace detail

inline std::filesystem::path dataset_table(const std::filesystem::path& p) {
  return std::filesystem::is_directory(p) ? p / kDatasetFile : p;
}

/// Writes data.tsv and images/<id>.ppm under `dir`.
inline void write_dataset(const std::filesystem::path& dir,
                          const std::vector<RawSample>& samples) {
  std::error_code ec;
  std::filesystem::create_directories(dir / kImageDir, ec);
  if (ec) throw DataError("cannot create " + (dir / kImageDir).string());
  std::ofstream out(dir / kDatasetFile, std::ios::binary);
  if (!out) throw DataError("cannot write " + (dir / kDatasetFile).string());
  out << kDatasetHeader << '\n';
  for (const auto& s : samples) {
    out << s.id << '\t' << detail::flatten_field(s.ocr_text) << '\t';
    for (std::size_t i = 0; i < s.captions.size(); ++i)
      out << (i ? "|" : "") << detail::flatten_field(s.captions[i]);
    out << '\t' << s.labels.mis;
    for (int v : s.labels.sub) out << '\t' << v;
    out << '\n';
    write_ppm((dir / kImageDir / (s.id + ".ppm")).string(), s.image);
  }
}

/// Parses and validates a dataset; samples come back sorted by id. Images
/// are read from the images/ directory next to the table.
inline std::vector<RawSample> ingest(const std::filesystem::path& path) {
  const auto table = dataset_table(path);
  std::ifstream in(table);
  if (!in) throw DataError("cannot open dataset " + table.string());
  const auto image_dir = table.parent_path() / kImageDir;

  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw DataError(table.string() + ":1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kDatasetHeader)
    throw DataError(table.string() + ":1: header does not match '" + kDatasetHeader + "'");

  std::vector<RawSample> samples;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = table.string() + ":" + std::to_string(line_no) + ": ";
    auto fields = detail::split(line, '\t');
    if (fields.size() != 8) throw DataError(where + "expected 8 tab-separated fields");
    RawSample s;
    s.id = fields[0];
    if (s.id.empty()) throw DataError(where + "empty id");
    if (!ids.insert(s.id).second) throw DataError(where + "duplicate id " + s.id);
    s.ocr_text = fields[1];
    if (!fields[2].empty()) s.captions = detail::split(fields[2], '|');
    auto parse_bit = [&](const std::string& f) {
      if (f == "0") return 0;
      if (f == "1") return 1;
      throw DataError(where + "label field '" + f + "' is not 0 or 1");
    };
    s.labels.mis = parse_bit(fields[3]);
    for (int c = 0; c < 4; ++c) s.labels.sub[c] = parse_bit(fields[4 + c]);
    if (!s.labels.valid())
      throw DataError(where + "label invariant violated: sub-labels require mis = 1 (id " +
                      s.id + ")");
    const auto img = image_dir / (s.id + ".ppm");
    if (!std::filesystem::exists(img))
      throw DataError("missing image for id " + s.id + " (" + img.string() + ")");
    s.image = read_ppm(img.string());
    samples.push_back(std::move(s));
  }
  std::sort(samples.begin(), samples.end(),
            [](const RawSample& a, const RawSample& b) { return a.id < b.id; });
  return samples;
}

}  // namespace gcanfuse
