#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flowsync/facegen.hpp"
#include "flowsync/grid.hpp"

namespace flowsync {

/// Binary PGM (P5, maxval 255). Values are clamped to [0, 1] and rounded.
void write_pgm(const std::filesystem::path& path, const Grid2D& frame);
/// Reads an 8-bit P5 file into [0, 1]. Throws IoError on malformed input.
Grid2D read_pgm(const std::filesystem::path& path);

/// A clip on disk: frame_000.pgm ... plus `frames.csv` with
/// `frame_idx,aperture,audio_0..audio_{d-1}` and `face.txt` with the geometry.
struct ClipRecord {
  FaceSpec spec;
  FrameSequence frames;
  std::vector<double> apertures;
  AudioTrack audio;
};

void write_clip(const std::filesystem::path& dir, const ClipRecord& clip);
ClipRecord read_clip(const std::filesystem::path& dir);

/// Audio-only CSV (`frame_idx,audio_0..`); also accepts a clip's frames.csv.
AudioTrack read_audio_csv(const std::filesystem::path& path);

/// Values of one named column, or nullopt if the CSV has no such column.
std::optional<std::vector<double>> read_csv_column(const std::filesystem::path& path,
                                                   const std::string& column);

/// A stored clip pair: `<dir>/cond/` and `<dir>/target/` clips (target carries the audio).
struct StoredPair {
  PoolTag pool = PoolTag::kArbitrary;
  ClipRecord cond;
  ClipRecord target;
};

void write_clip_pair(const std::filesystem::path& dir, const ClipPair& pair);
StoredPair read_clip_pair(const std::filesystem::path& dir, PoolTag pool);

/// Dataset manifest `<root>/manifest.csv` with rows `pair,pool,clip_len`.
struct ManifestRow {
  std::string pair;
  PoolTag pool = PoolTag::kArbitrary;
  std::size_t clip_len = 0;
};
void write_manifest(const std::filesystem::path& root, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& root);

std::string serialize_face_spec(const FaceSpec& spec);
FaceSpec parse_face_spec(const std::string& text);

/// Writes `text` to `path`, creating parent directories. Throws IoError on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double v);

}  // namespace flowsync
