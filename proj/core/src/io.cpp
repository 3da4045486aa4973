#include "flowsync/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <sstream>

#include "flowsync/error.hpp"

namespace flowsync {
namespace fs = std::filesystem;
namespace {

std::string frame_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%03zu.pgm", i);
  return buf;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  return out;
}

double parse_number(const std::string& s, const fs::path& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IoError(where.string() + ": cannot parse number '" + s + "'");
  }
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty CSV");
  t.header = split_csv(line);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto row = split_csv(line);
    if (row.size() != t.header.size()) {
      throw IoError(path.string() + ": row has " + std::to_string(row.size()) +
                    " cells, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_pgm(const fs::path& path, const Grid2D& frame) {
  std::string data = "P5\n" + std::to_string(frame.width()) + " " +
                     std::to_string(frame.height()) + "\n255\n";
  const std::size_t header = data.size();
  data.resize(header + frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const double v = std::clamp(frame[i], 0.0, 1.0);
    data[header + i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  write_text_file(path, data);
}

Grid2D read_pgm(const fs::path& path) {
  const std::string data = read_text_file(path);
  std::size_t pos = 0;
  // Header tokens separated by whitespace; '#' comments run to end of line.
  auto next_token = [&]() -> std::string {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t b = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(b, pos - b);
  };
  if (next_token() != "P5") throw IoError(path.string() + ": not a binary PGM (P5)");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token());
    h = std::stoul(next_token());
    maxval = std::stoul(next_token());
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PGM header");
  }
  if (w == 0 || h == 0 || maxval != 255) {
    throw IoError(path.string() + ": unsupported PGM geometry or maxval");
  }
  ++pos;  // single whitespace byte after maxval
  if (data.size() < pos + w * h) throw IoError(path.string() + ": truncated PGM data");
  std::vector<double> values(w * h);
  for (std::size_t i = 0; i < w * h; ++i) {
    values[i] = static_cast<unsigned char>(data[pos + i]) / 255.0;
  }
  return Grid2D(h, w, std::move(values));
}

std::string serialize_face_spec(const FaceSpec& spec) {
  std::ostringstream out;
  out << "identity_seed = " << spec.identity_seed << "\n"
      << "pose_dx = " << spec.pose.dx << "\n"
      << "pose_dy = " << spec.pose.dy << "\n"
      << "mouth_x = " << format_double(spec.mouth_center.x) << "\n"
      << "mouth_y = " << format_double(spec.mouth_center.y) << "\n"
      << "mouth_rx = " << format_double(spec.mouth_radii.rx) << "\n"
      << "mouth_ry = " << format_double(spec.mouth_radii.ry) << "\n"
      << "frame_h = " << spec.frame.height << "\n"
      << "frame_w = " << spec.frame.width << "\n"
      << "pose_max = " << spec.pose_max << "\n";
  return out.str();
}

FaceSpec parse_face_spec(const std::string& text) {
  FaceSpec spec;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) throw IoError("face spec: malformed line '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "identity_seed") spec.identity_seed = std::stoull(val);
      else if (key == "pose_dx") spec.pose.dx = std::stoi(val);
      else if (key == "pose_dy") spec.pose.dy = std::stoi(val);
      else if (key == "mouth_x") spec.mouth_center.x = std::stod(val);
      else if (key == "mouth_y") spec.mouth_center.y = std::stod(val);
      else if (key == "mouth_rx") spec.mouth_radii.rx = std::stod(val);
      else if (key == "mouth_ry") spec.mouth_radii.ry = std::stod(val);
      else if (key == "frame_h") spec.frame.height = std::stoul(val);
      else if (key == "frame_w") spec.frame.width = std::stoul(val);
      else if (key == "pose_max") spec.pose_max = std::stoi(val);
      else throw IoError("face spec: unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      throw IoError("face spec: bad value for '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

void write_clip(const fs::path& dir, const ClipRecord& clip) {
  if (clip.frames.size() != clip.apertures.size() ||
      (clip.audio.size() != 0 && clip.audio.size() != clip.frames.size())) {
    throw ContractError("write_clip: frames, apertures and audio lengths differ");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  for (std::size_t i = 0; i < clip.frames.size(); ++i) write_pgm(dir / frame_name(i), clip.frames[i]);

  std::ostringstream csv;
  const std::size_t d = clip.audio.dim();
  csv << "frame_idx,aperture";
  for (std::size_t k = 0; k < d; ++k) csv << ",audio_" << k;
  csv << "\n";
  for (std::size_t i = 0; i < clip.frames.size(); ++i) {
    csv << i << "," << format_double(clip.apertures[i]);
    for (std::size_t k = 0; k < d; ++k) csv << "," << format_double(clip.audio.features[i][k]);
    csv << "\n";
  }
  write_text_file(dir / "frames.csv", csv.str());
  write_text_file(dir / "face.txt", serialize_face_spec(clip.spec));
}

AudioTrack read_audio_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (t.header[c].rfind("audio_", 0) == 0) cols.push_back(c);
  }
  if (cols.empty()) throw IoError(path.string() + ": no audio_* columns");
  AudioTrack track;
  for (const auto& row : t.rows) {
    std::vector<double> f;
    for (std::size_t c : cols) f.push_back(parse_number(row[c], path));
    track.features.push_back(std::move(f));
  }
  track.validate();
  return track;
}

ClipRecord read_clip(const fs::path& dir) {
  ClipRecord clip;
  clip.spec = parse_face_spec(read_text_file(dir / "face.txt"));
  const CsvTable t = read_csv(dir / "frames.csv");
  const auto ap = std::find(t.header.begin(), t.header.end(), "aperture");
  if (ap == t.header.end()) throw IoError((dir / "frames.csv").string() + ": no aperture column");
  const std::size_t ap_col = static_cast<std::size_t>(ap - t.header.begin());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    clip.apertures.push_back(parse_number(t.rows[i][ap_col], dir / "frames.csv"));
    clip.frames.push_back(read_pgm(dir / frame_name(i)));
  }
  const bool has_audio = std::any_of(t.header.begin(), t.header.end(), [](const std::string& h) {
    return h.rfind("audio_", 0) == 0;
  });
  if (has_audio) clip.audio = read_audio_csv(dir / "frames.csv");
  return clip;
}

std::optional<std::vector<double>> read_csv_column(const fs::path& path, const std::string& column) {
  const CsvTable t = read_csv(path);
  const auto it = std::find(t.header.begin(), t.header.end(), column);
  if (it == t.header.end()) return std::nullopt;
  const auto col = static_cast<std::size_t>(it - t.header.begin());
  std::vector<double> out;
  for (const auto& row : t.rows) out.push_back(parse_number(row[col], path));
  return out;
}

void write_clip_pair(const fs::path& dir, const ClipPair& pair) {
  write_clip(dir / "cond", {pair.cond_spec, pair.cond_clip, pair.cond_apertures, {}});
  write_clip(dir / "target",
             {pair.target_spec, pair.target_clip, pair.ground_truth_apertures, pair.target_audio});
}

StoredPair read_clip_pair(const fs::path& dir, PoolTag pool) {
  StoredPair p;
  p.pool = pool;
  p.cond = read_clip(dir / "cond");
  p.target = read_clip(dir / "target");
  if (p.cond.frames.size() != p.target.frames.size() ||
      p.target.audio.size() != p.target.frames.size()) {
    throw IoError(dir.string() + ": cond/target/audio lengths differ");
  }
  return p;
}

void write_manifest(const fs::path& root, const std::vector<ManifestRow>& rows) {
  std::ostringstream out;
  out << "pair,pool,clip_len\n";
  for (const auto& r : rows) out << r.pair << "," << to_string(r.pool) << "," << r.clip_len << "\n";
  write_text_file(root / "manifest.csv", out.str());
}

std::vector<ManifestRow> read_manifest(const fs::path& root) {
  const CsvTable t = read_csv(root / "manifest.csv");
  if (t.header != std::vector<std::string>{"pair", "pool", "clip_len"}) {
    throw IoError((root / "manifest.csv").string() + ": unexpected header");
  }
  std::vector<ManifestRow> rows;
  for (const auto& r : t.rows) {
    ManifestRow m;
    m.pair = r[0];
    try {
      m.pool = parse_pool_tag(r[1]);
      m.clip_len = std::stoul(r[2]);
    } catch (const std::exception&) {
      throw IoError((root / "manifest.csv").string() + ": bad row for '" + r[0] + "'");
    }
    rows.push_back(std::move(m));
  }
  return rows;
}

}  // namespace flowsync
