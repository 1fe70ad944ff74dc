#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "prosospeak/label.hpp"

namespace prosospeak {

enum class SynthesisKind { none, TTS, VC, hybrid };
enum class Partition { train, dev, test };

std::string to_string(SynthesisKind k);
SynthesisKind synthesis_kind_from_string(const std::string& s);
std::string to_string(Partition p);
Partition partition_from_string(const std::string& s);

struct ManifestRecord {
  std::string path;
  Label label = Label::REAL;
  std::string system_id;
  SynthesisKind synthesis_kind = SynthesisKind::none;
  Partition partition = Partition::train;
};

struct Corpus {
  std::vector<ManifestRecord> records;

  std::vector<ManifestRecord> partition(Partition p) const;
  std::size_t count(Label l) const;
  std::size_t count(Partition p) const;
};

/// Parse and validate a manifest CSV with header
/// `path,label,system_id,synthesis_kind,partition`.
Corpus parse_manifest(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const Corpus& corpus);

/// Restrict DF records to the given synthesis kinds; REAL records are always
/// kept. Errors when nothing of the DF class survives.
Corpus filter_by_kind(const Corpus& corpus, const std::set<SynthesisKind>& kinds);

/// Desk-scale corpus of procedurally generated utterances: harmonic "real"
/// voices with vibrato and smooth amplitude, "fake-TTS" with flat pitch and
/// stepwise amplitude, and "fake-VC" with real prosody but a fixed spectral
/// warp. Writes 16 kHz WAV files plus manifest.csv (50/25/25 splits) into
/// out_dir and returns the corpus.
Corpus make_synthetic_corpus(std::uint64_t seed, int n_per_class,
                             const std::filesystem::path& out_dir);

}  // namespace prosospeak
