// Copyright 2026 The advdetect Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "advdetect/classifier.hpp"

#include <iostream>
#include <sstream>

#include "advdetect/codec.hpp"
#include "advdetect/parallel.hpp"
#include "advdetect/subprocess.hpp"

namespace advdetect {

using nlohmann::json;

std::vector<Top5> classify_batch(const Classifier& backend, std::span<const Image> images, int workers) {
  std::vector<Top5> out(images.size());
  parallel_for(images.size(), workers, [&](std::size_t i) {
    try {
      out[i] = backend.classify_top5(images[i]);
    } catch (const Error& e) {
      throw Error(e.kind(), "batch index " + std::to_string(i) + ": " + e.what());
    }
  });
  return out;
}

DeskBackend::DeskBackend(std::shared_ptr<const DeskModel> model, std::string id)
    : model_(std::move(model)), id_(std::move(id)) {
  if (!model_) throw Error(ErrorKind::BackendUnavailable, "desk backend without a model");
  if (model_->num_labels() < kTopK + 1) throw Error(ErrorKind::LabelSpaceTooSmall, "desk model label space below 6");
}

std::string DeskBackend::input_contract() const {
  return "bilinear resize to " + std::to_string(model_->width()) + "x" + std::to_string(model_->height()) +
         ", intensities centred at 0.5";
}

Top5 DeskBackend::classify_top5(const Image& img) const {
  validate(img);
  return model_->classify_top5(img);
}

// ---------------------------------------------------------------------------

namespace {

json parse_line(const std::string& line) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw Error(ErrorKind::ProtocolViolation, "message is not an object");
    return j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ProtocolViolation, std::string("malformed message: ") + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorKind::ProtocolViolation, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::ProtocolViolation, std::string("bad type for field '") + key + "'");
  }
}

}  // namespace

std::string encode_handshake(const Handshake& h) {
  json j{{"protocol", kProtocolName}, {"version", h.version}, {"num_labels", h.num_labels}};
  if (!h.backend_id.empty()) j["backend_id"] = h.backend_id;
  return j.dump();
}

Handshake parse_handshake(const std::string& line) {
  json j;
  try {
    j = parse_line(line);
  } catch (const Error& e) {
    throw Error(ErrorKind::BackendUnavailable, std::string("handshake failed: ") + e.what());
  }
  if (j.value("protocol", std::string()) != kProtocolName) {
    throw Error(ErrorKind::BackendUnavailable, "handshake names an unknown protocol");
  }
  Handshake h;
  h.version = j.value("version", 0);
  h.num_labels = j.value("num_labels", 0);
  h.backend_id = j.value("backend_id", std::string());
  if (h.version != kProtocolVersion) {
    throw Error(ErrorKind::BackendUnavailable, "unsupported protocol version " + std::to_string(h.version));
  }
  if (h.num_labels < kTopK + 1) {
    throw Error(ErrorKind::LabelSpaceTooSmall, "backend label space " + std::to_string(h.num_labels) + " below 6");
  }
  return h;
}

std::string encode_request(std::uint64_t request_id, const Image& img) {
  const Bytes png = encode_png(quantize(img));
  return json{{"id", request_id}, {"width", img.width()}, {"height", img.height()}, {"image", base64_encode(png)}}
      .dump();
}

std::pair<std::uint64_t, Image> parse_request(const std::string& line) {
  const json j = parse_line(line);
  const auto id = field<std::uint64_t>(j, "id");
  const auto w = field<int>(j, "width");
  const auto h = field<int>(j, "height");
  const Rgb8 raw = decode_png(base64_decode(field<std::string>(j, "image")));
  if (raw.width != w || raw.height != h) throw Error(ErrorKind::ProtocolViolation, "payload size mismatch");
  return {id, dequantize(raw)};
}

std::string encode_reply(std::uint64_t request_id, const Top5& t) {
  return json{{"id", request_id}, {"labels", t.labels}, {"confidences", t.confidences}}.dump();
}

Top5 parse_reply(const std::string& line, std::uint64_t expected_id, int num_labels) {
  const json j = parse_line(line);
  if (j.contains("error")) {
    throw Error(ErrorKind::BackendUnavailable, "backend error: " + j["error"].dump());
  }
  if (field<std::uint64_t>(j, "id") != expected_id) throw Error(ErrorKind::ProtocolViolation, "reply id mismatch");
  const auto labels = field<std::vector<Label>>(j, "labels");
  const auto conf = field<std::vector<double>>(j, "confidences");
  if (labels.size() != kTopK || conf.size() != kTopK) {
    throw Error(ErrorKind::ProtocolViolation, "reply must carry exactly 5 labels and 5 confidences");
  }
  Top5 t;
  std::copy(labels.begin(), labels.end(), t.labels.begin());
  std::copy(conf.begin(), conf.end(), t.confidences.begin());
  check_top5(t, num_labels);
  return t;
}

// ---------------------------------------------------------------------------

struct ExecBackend::Channel {
  explicit Channel(const std::vector<std::string>& argv) : process(argv) {}
  ChildProcess process;
  std::uint64_t next_id = 1;
  bool broken = false;
};

namespace {

std::vector<std::string> split_command(const std::string& command) {
  std::istringstream is(command);
  std::vector<std::string> argv;
  for (std::string tok; is >> tok;) argv.push_back(tok);
  return argv;
}

}  // namespace

ExecBackend::ExecBackend(const std::string& command, int pool_size) {
  const auto argv = split_command(command);
  if (argv.empty()) throw Error(ErrorKind::BackendUnavailable, "empty exec backend command");
  for (int i = 0; i < std::max(1, pool_size); ++i) {
    auto channel = std::make_unique<Channel>(argv);
    const auto line = channel->process.read_line();
    if (!line) throw Error(ErrorKind::BackendUnavailable, "backend exited before handshake: " + command);
    const Handshake h = parse_handshake(*line);
    if (i == 0) {
      num_labels_ = h.num_labels;
      id_ = h.backend_id.empty() ? "exec:" + command : h.backend_id;
    } else if (h.num_labels != num_labels_) {
      throw Error(ErrorKind::BackendUnavailable, "pooled backends disagree on label space");
    }
    idle_.push_back(channel.get());
    channels_.push_back(std::move(channel));
  }
}

ExecBackend::~ExecBackend() = default;

ExecBackend::Channel& ExecBackend::acquire() const {
  std::unique_lock lock(mutex_);
  idle_cv_.wait(lock, [this] { return !idle_.empty(); });
  Channel* c = idle_.back();
  idle_.pop_back();
  return *c;
}

void ExecBackend::release(Channel& channel) const {
  {
    std::lock_guard lock(mutex_);
    idle_.push_back(&channel);
  }
  idle_cv_.notify_one();
}

Top5 ExecBackend::classify_top5(const Image& img) const {
  validate(img);
  Channel& channel = acquire();
  struct Releaser {
    const ExecBackend* self;
    Channel* c;
    ~Releaser() { self->release(*c); }
  } releaser{this, &channel};

  if (channel.broken) throw Error(ErrorKind::BackendUnavailable, "backend channel is broken");
  const std::uint64_t request_id = channel.next_id++;
  if (!channel.process.write_line(encode_request(request_id, img))) {
    channel.broken = true;
    throw Error(ErrorKind::BackendUnavailable, "backend process is not accepting requests");
  }
  const auto line = channel.process.read_line();
  if (!line) {
    channel.broken = true;
    throw Error(ErrorKind::BackendUnavailable, "backend process closed its output");
  }
  try {
    return parse_reply(*line, request_id, num_labels_);
  } catch (const Error&) {
    channel.broken = true;
    throw;
  }
}

void serve_protocol(const Classifier& backend, std::istream& in, std::ostream& out) {
  out << encode_handshake({kProtocolVersion, backend.num_labels(), backend.id()}) << '\n' << std::flush;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    std::uint64_t id = 0;
    try {
      auto [request_id, img] = parse_request(line);
      id = request_id;
      out << encode_reply(id, backend.classify_top5(img)) << '\n' << std::flush;
    } catch (const std::exception& e) {
      out << json{{"id", id}, {"error", e.what()}}.dump() << '\n' << std::flush;
    }
  }
}

std::unique_ptr<Classifier> make_backend(const std::string& selector, std::shared_ptr<const DeskModel> desk_model,
                                         int workers) {
  if (selector == "desk") {
    if (!desk_model) throw Error(ErrorKind::MissingInput, "desk backend needs a model file");
    return std::make_unique<DeskBackend>(std::move(desk_model), "desk");
  }
  if (selector.rfind("exec:", 0) == 0) return std::make_unique<ExecBackend>(selector.substr(5), workers);
  throw Error(ErrorKind::InvalidArgument, "unknown backend selector '" + selector + "'");
}

}  // namespace advdetect
