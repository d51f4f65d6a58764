#include "twopoint/cohort_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace twopoint::synth {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "raw record I/O assumes a little-endian host");

json to_json(const SynthConfig& c) {
  return {{"crosstalk", c.crosstalk},           {"group_leakage", c.group_leakage},
          {"noise_floor", c.noise_floor},       {"subject_jitter", c.subject_jitter},
          {"carrier_low_hz", c.carrier_low_hz}, {"carrier_high_hz", c.carrier_high_hz}};
}

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  c.crosstalk = j.value("crosstalk", c.crosstalk);
  c.group_leakage = j.value("group_leakage", c.group_leakage);
  c.noise_floor = j.value("noise_floor", c.noise_floor);
  c.subject_jitter = j.value("subject_jitter", c.subject_jitter);
  c.carrier_low_hz = j.value("carrier_low_hz", c.carrier_low_hz);
  c.carrier_high_hz = j.value("carrier_high_hz", c.carrier_high_hz);
  return c;
}

std::string record_file_name(int subject, int gesture, int rep) {
  std::ostringstream os;
  os << "s" << std::setw(2) << std::setfill('0') << subject << "_g" << std::setw(2) << gesture
     << "_r" << rep << ".f32";
  return os.str();
}

void write_record_raw(const MultiChannelSignal& sig, const fs::path& file) {
  std::vector<float> buf(sig.data().size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(sig.data()[i]);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

MultiChannelSignal read_record_raw(const fs::path& file, std::size_t length) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::vector<float> buf(kChannels * length);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float))) {
    throw std::runtime_error("truncated record " + file.string());
  }
  MultiChannelSignal sig(length);
  for (std::size_t i = 0; i < buf.size(); ++i) sig.data()[i] = buf[i];
  return sig;
}

namespace {

json manifest_json(const CohortManifest& m) {
  json records = json::array();
  for (int s = 0; s < m.subjects; ++s) {
    for (int rep = 0; rep < m.reps; ++rep) {
      for (const GestureSpec& g : gesture_table()) {
        records.push_back({{"file", record_file_name(s, g.id, rep)},
                           {"subject", s},
                           {"gesture", g.id},
                           {"rep", rep},
                           {"seed", record_seed(m.seed, s, g.id, rep)},
                           {"labels", g.labels.values}});
      }
    }
  }
  json gestures = json::array();
  for (const GestureSpec& g : gesture_table()) {
    gestures.push_back({{"id", g.id}, {"name", g.name}, {"labels", g.labels.values}});
  }
  return {{"format", "twopoint-cohort/1"},
          {"subjects", m.subjects},
          {"reps", m.reps},
          {"duration_s", m.duration_s},
          {"seed", m.seed},
          {"sample_rate", m.sample_rate},
          {"channels", kChannels},
          {"samples_per_record", static_cast<std::size_t>(std::llround(m.duration_s * m.sample_rate))},
          {"sample_format", "float32-le, channel-major"},
          {"artifacts", format_artifacts(m.artifacts)},
          {"synth", to_json(m.config)},
          {"gestures", gestures},
          {"records", records}};
}

void write_manifest(const CohortManifest& m, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << manifest_json(m).dump(2) << "\n";
}

}  // namespace

void write_cohort(const CohortManifest& manifest, const fs::path& dir) {
  write_manifest(manifest, dir);
  for (int s = 0; s < manifest.subjects; ++s) {
    for (const LabeledRecord& r : generate_subject(manifest, s)) {
      write_record_raw(r.signal, dir / record_file_name(s, r.signal.meta.gesture,
                                                        r.signal.meta.repetition));
    }
  }
}

void write_cohort(const CohortDataset& dataset, const fs::path& dir) {
  write_manifest(dataset.manifest, dir);
  for (const LabeledRecord& r : dataset.records) {
    const SignalMeta& m = r.signal.meta;
    write_record_raw(r.signal, dir / record_file_name(m.subject, m.gesture, m.repetition));
  }
}

CohortManifest read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("missing manifest.json in " + dir.string());
  const json j = json::parse(in);
  if (j.value("format", "") != "twopoint-cohort/1") {
    throw std::runtime_error("unsupported dataset format in " + dir.string());
  }
  CohortManifest m;
  m.subjects = j.at("subjects").get<int>();
  m.reps = j.at("reps").get<int>();
  m.duration_s = j.at("duration_s").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.sample_rate = j.at("sample_rate").get<double>();
  m.artifacts = parse_artifacts(j.value("artifacts", "none"));
  m.config = synth_config_from_json(j.value("synth", json::object()));
  return m;
}

std::vector<LabeledRecord> read_subject(const fs::path& dir, int subject) {
  const CohortManifest m = read_manifest(dir);
  if (subject < 0 || subject >= m.subjects) {
    throw std::out_of_range("subject " + std::to_string(subject) + " not in dataset");
  }
  const auto n = static_cast<std::size_t>(std::llround(m.duration_s * m.sample_rate));
  std::vector<LabeledRecord> out;
  for (int rep = 0; rep < m.reps; ++rep) {
    for (const GestureSpec& g : gesture_table()) {
      LabeledRecord r{read_record_raw(dir / record_file_name(subject, g.id, rep), n), g.labels};
      r.signal.meta = {subject, g.id, rep, record_seed(m.seed, subject, g.id, rep)};
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace twopoint::synth
