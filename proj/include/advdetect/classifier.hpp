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

#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "advdetect/desk_model.hpp"
#include "advdetect/image.hpp"
#include "advdetect/top5.hpp"

namespace advdetect {

/// Any top-5 image classifier. Implementations are deterministic for a
/// fixed input and safe to call from several threads.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual const std::string& id() const = 0;
  virtual int num_labels() const = 0;
  /// Human-readable description of the preprocessing the backend applies.
  virtual std::string input_contract() const = 0;
  /// Gateway protocol version; 0 for in-process backends.
  virtual int protocol_version() const { return 0; }

  virtual Top5 classify_top5(const Image& img) const = 0;

  /// Differentiable model behind the backend, if any.
  virtual const DeskModel* gradient_model() const { return nullptr; }
};

/// Elementwise classify_top5, order preserved. Stops at the first failing
/// image and rethrows with its index in the message.
std::vector<Top5> classify_batch(const Classifier& backend, std::span<const Image> images, int workers = 1);

class DeskBackend final : public Classifier {
 public:
  DeskBackend(std::shared_ptr<const DeskModel> model, std::string id);

  const std::string& id() const override { return id_; }
  int num_labels() const override { return model_->num_labels(); }
  std::string input_contract() const override;
  Top5 classify_top5(const Image& img) const override;
  const DeskModel* gradient_model() const override { return model_.get(); }

  const DeskModel& model() const { return *model_; }

 private:
  std::shared_ptr<const DeskModel> model_;
  std::string id_;
};

// ---------------------------------------------------------------------------
// Child-process protocol: one JSON object per line on the child's stdio.
//
//   child  -> {"protocol":"top5-gateway","version":1,"num_labels":K[,"backend_id":s]}
//   parent -> {"id":n,"width":w,"height":h,"image":"<base64 PNG>"}
//   child  -> {"id":n,"labels":[5 ints],"confidences":[5 reals]}

inline constexpr const char* kProtocolName = "top5-gateway";
inline constexpr int kProtocolVersion = 1;

struct Handshake {
  int version = 0;
  int num_labels = 0;
  std::string backend_id;
};

std::string encode_handshake(const Handshake& h);
Handshake parse_handshake(const std::string& line);

std::string encode_request(std::uint64_t request_id, const Image& img);
/// Decodes a request line back into (id, image).
std::pair<std::uint64_t, Image> parse_request(const std::string& line);

std::string encode_reply(std::uint64_t request_id, const Top5& t);
/// Validates id, shape and Top5 invariants; ProtocolViolation otherwise.
Top5 parse_reply(const std::string& line, std::uint64_t expected_id, int num_labels);

class ChildProcess;

/// External classifier reached through the line protocol. Each child is a
/// serial channel; `pool_size` children give parallelism.
class ExecBackend final : public Classifier {
 public:
  /// `command` is split on whitespace into program and arguments.
  explicit ExecBackend(const std::string& command, int pool_size = 1);
  ~ExecBackend() override;

  const std::string& id() const override { return id_; }
  int num_labels() const override { return num_labels_; }
  std::string input_contract() const override { return "native-size RGB8 PNG; backend-owned preprocessing"; }
  int protocol_version() const override { return kProtocolVersion; }
  Top5 classify_top5(const Image& img) const override;

 private:
  struct Channel;
  Channel& acquire() const;
  void release(Channel& channel) const;

  std::vector<std::unique_ptr<Channel>> channels_;
  mutable std::mutex mutex_;
  mutable std::condition_variable idle_cv_;
  mutable std::vector<Channel*> idle_;
  std::string id_;
  int num_labels_ = 0;
};

/// Serves a classifier over the line protocol on the given streams until
/// EOF. Used by the `serve` subcommand and by test fixtures.
void serve_protocol(const Classifier& backend, std::istream& in, std::ostream& out);

/// Builds a backend from a CLI selector: "desk" (with the given model) or
/// "exec:<command line>".
std::unique_ptr<Classifier> make_backend(const std::string& selector, std::shared_ptr<const DeskModel> desk_model,
                                         int workers = 1);

}  // namespace advdetect
