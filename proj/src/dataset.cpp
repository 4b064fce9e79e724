#include "spikekit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>

#include "spikekit/image_io.hpp"

namespace spikekit {

namespace fs = std::filesystem;

namespace {

fs::path normalized(const fs::path& p)
{
  return fs::absolute(p).lexically_normal();
}

fs::path find_meta(const fs::path& root)
{
  fs::path dir_name = root.filename();
  if (dir_name.empty())
    dir_name = root.parent_path().filename();
  const fs::path preferred = root / (dir_name.string() + ".info");
  if (fs::is_regular_file(preferred))
    return preferred;

  std::vector<fs::path> infos;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_regular_file() && entry.path().extension() == ".info")
      infos.push_back(entry.path());
  if (infos.size() == 1)
    return infos.front();
  if (infos.empty())
    throw SchemaError("dataset '" + root.string() + "' has no meta file (expected '" +
                      preferred.filename().string() + "')");
  throw SchemaError("dataset '" + root.string() + "' has " + std::to_string(infos.size()) +
                    " .info files and none named '" + preferred.filename().string() + "'");
}

std::size_t parse_count(const std::string& key, const std::string& value)
{
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size() || value.empty())
    throw ParseError("manifest: '" + key + "' must be a non-negative integer, got '" + value + "'");
  return out;
}

} // namespace

DatasetDescriptor scan(const fs::path& root_in, std::string_view name)
{
  const fs::path root = normalized(root_in);
  if (!fs::is_directory(root))
    throw IoError("dataset root '" + root.string() + "' is not a directory");

  DatasetDescriptor desc;
  desc.root = root;
  desc.name = name.empty() ? root.filename().string() : std::string(name);
  desc.meta = read_meta(find_meta(root));

  std::vector<fs::path> dats;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_regular_file() && entry.path().extension() == ".dat")
      dats.push_back(entry.path());
  std::sort(dats.begin(), dats.end(),
            [](const fs::path& a, const fs::path& b) { return a.stem().string() < b.stem().string(); });

  std::map<std::string, fs::path> labels;
  const fs::path gt = root / "gt";
  if (fs::is_directory(gt)) {
    for (const auto& entry : fs::directory_iterator(gt)) {
      if (!entry.is_regular_file() || !is_image_path(entry.path()))
        continue;
      const std::string stem = entry.path().stem().string();
      // .pgm wins over .png when both exist.
      auto it = labels.find(stem);
      if (it == labels.end() || entry.path().extension() == ".pgm")
        labels[stem] = entry.path();
    }
  }

  std::vector<std::string> unmatched;
  for (const auto& dat : dats) {
    SampleEntry s;
    s.stem = dat.stem().string();
    s.spike_path = dat;
    s.num_steps = dat_frame_count(dat, desc.meta);
    if (auto it = labels.find(s.stem); it != labels.end())
      s.label_path = it->second;
    else
      unmatched.push_back(s.stem);
    desc.samples.push_back(std::move(s));
  }

  const bool all_labeled = !desc.samples.empty() && unmatched.empty();
  desc.label_type = all_labeled ? LabelType::image : LabelType::raw;
  if (!all_labeled) {
    const bool some_labeled = unmatched.size() < desc.samples.size();
    if (some_labeled) {
      std::string list;
      for (const auto& stem : unmatched)
        list += (list.empty() ? "" : ", ") + stem;
      desc.warnings.push_back("ground truth missing for " + std::to_string(unmatched.size()) +
                              " of " + std::to_string(desc.samples.size()) + " samples: " + list +
                              "; treating dataset as raw");
    }
  }
  return desc;
}

Sample load_sample(const DatasetDescriptor& desc, std::size_t index, std::optional<BlockRange> block)
{
  if (index >= desc.samples.size())
    throw RangeError("sample " + std::to_string(index) + " outside dataset of " +
                     std::to_string(desc.samples.size()));
  const SampleEntry& entry = desc.samples[index];

  Sample sample;
  sample.spikes = block ? read_dat_block(entry.spike_path, desc.meta, block->start, block->length)
                        : read_dat(entry.spike_path, desc.meta);
  if (entry.label_path) {
    GrayImage label = read_image(*entry.label_path);
    if (label.height() != desc.height() || label.width() != desc.width())
      throw SizeError("label '" + entry.label_path->string() + "' is " +
                      std::to_string(label.height()) + "x" + std::to_string(label.width()) +
                      ", spikes are " + std::to_string(desc.height()) + "x" +
                      std::to_string(desc.width()));
    sample.label = std::move(label);
  }
  return sample;
}

std::string format_manifest(const DatasetDescriptor& desc)
{
  std::string out = "# spikekit dataset manifest\n";
  out += "name = " + desc.name + "\n";
  out += "label_type = " + std::string(to_string(desc.label_type)) + "\n";
  std::string meta = format_meta(desc.meta);
  for (std::size_t pos = 0; pos < meta.size();) {
    const auto nl = meta.find('\n', pos);
    out += "meta." + meta.substr(pos, nl - pos) + "\n";
    pos = nl + 1;
  }
  out += "samples = " + std::to_string(desc.samples.size()) + "\n";
  for (std::size_t i = 0; i < desc.samples.size(); ++i) {
    const auto& s = desc.samples[i];
    const std::string prefix = "sample." + std::to_string(i) + ".";
    out += prefix + "stem = " + s.stem + "\n";
    out += prefix + "spikes = " + s.spike_path.lexically_relative(desc.root).generic_string() + "\n";
    out += prefix + "frames = " + std::to_string(s.num_steps) + "\n";
    if (s.label_path)
      out += prefix + "label = " + s.label_path->lexically_relative(desc.root).generic_string() + "\n";
  }
  return out;
}

DatasetDescriptor parse_manifest(std::string_view text, const fs::path& root)
{
  DatasetDescriptor desc;
  desc.root = normalized(root);
  std::string meta_text;
  std::map<std::string, std::string> fields;
  std::optional<std::size_t> count;

  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#')
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("manifest: expected 'key = value', got '" + line + "'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.rfind("meta.", 0) == 0)
      meta_text += key.substr(5) + " = " + value + "\n";
    else if (key == "samples")
      count = parse_count(key, value);
    else
      fields[key] = value;
  }

  if (!fields.count("name"))
    throw SchemaError("manifest: missing required key 'name'");
  if (!count)
    throw SchemaError("manifest: missing required key 'samples'");
  desc.name = fields["name"];
  desc.label_type = parse_label_type(fields.count("label_type") ? fields["label_type"] : "raw");
  desc.meta = parse_meta(meta_text, "manifest meta");

  for (std::size_t i = 0; i < *count; ++i) {
    const std::string prefix = "sample." + std::to_string(i) + ".";
    for (const char* required : {"stem", "spikes", "frames"})
      if (!fields.count(prefix + required))
        throw SchemaError("manifest: missing required key '" + prefix + required + "'");
    SampleEntry s;
    s.stem = fields[prefix + "stem"];
    s.spike_path = (desc.root / fields[prefix + "spikes"]).lexically_normal();
    s.num_steps = parse_count(prefix + "frames", fields[prefix + "frames"]);
    if (auto it = fields.find(prefix + "label"); it != fields.end())
      s.label_path = (desc.root / it->second).lexically_normal();
    desc.samples.push_back(std::move(s));
  }
  return desc;
}

void write_manifest(const DatasetDescriptor& desc, const fs::path& path)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  out << format_manifest(desc);
  if (!out)
    throw IoError("write to '" + path.string() + "' failed");
}

DatasetDescriptor read_manifest(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open manifest '" + path.string() + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_manifest(text, normalized(path).parent_path());
}

} // namespace spikekit
