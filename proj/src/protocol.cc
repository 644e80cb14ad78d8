// Copyright 2026 The taemu Authors
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

#include "taemu/protocol.h"

#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include <fmt/format.h>

#include "taemu/bytes.h"
#include "taemu/error.h"

namespace taemu::proto {

namespace {

[[noreturn]] void Malformed(const std::string& why) {
  throw Error(ErrorCode::kProtocolError, why);
}

constexpr size_t kHeaderSize = 4 + 1 + 4 + 4 + 2;

}  // namespace

std::vector<uint8_t> EncodeRequest(const Request& req) {
  ByteWriter w;
  w.U32(kMagic);
  w.U8(static_cast<uint8_t>(req.opcode));
  w.U32(req.session);
  w.U32(req.cmd_id);
  w.U16(req.param_types);
  for (const auto& s : req.slots) {
    w.U8(static_cast<uint8_t>(s.kind));
    switch (s.kind) {
      case SlotKind::kNone:
        w.U32(0);
        break;
      case SlotKind::kValue:
        w.U32(8);
        w.U32(s.a);
        w.U32(s.b);
        break;
      case SlotKind::kMemref:
        w.U32(static_cast<uint32_t>(s.bytes.size()));
        w.Bytes(s.bytes);
        break;
      case SlotKind::kShmPath:
        w.U32(static_cast<uint32_t>(s.path.size()));
        w.Str(s.path);
        break;
      case SlotKind::kMemrefSized:
        w.U32(static_cast<uint32_t>(s.bytes.size() + 4));
        w.U32(s.declared);
        w.Bytes(s.bytes);
        break;
    }
  }
  return w.Take();
}

Request DecodeRequest(std::span<const uint8_t> frame) {
  ByteReader r(frame);
  auto magic = r.U32();
  if (!magic || *magic != kMagic) Malformed("bad magic");
  auto op = r.U8();
  auto session = r.U32();
  auto cmd = r.U32();
  auto types = r.U16();
  if (!types) Malformed("truncated header");
  if (*op < 1 || *op > 4) Malformed(fmt::format("unknown opcode {}", *op));
  Request req;
  req.opcode = static_cast<Opcode>(*op);
  req.session = *session;
  req.cmd_id = *cmd;
  req.param_types = *types;
  for (auto& s : req.slots) {
    auto kind = r.U8();
    auto len = r.U32();
    if (!len) Malformed("truncated slot header");
    if (*kind > 4) Malformed(fmt::format("unknown slot kind {}", *kind));
    if (*len > kMaxPayload) Malformed(fmt::format("payload of {} bytes", *len));
    auto payload = r.Bytes(*len);
    if (!payload) Malformed("truncated payload");
    s.kind = static_cast<SlotKind>(*kind);
    ByteReader p(*payload);
    switch (s.kind) {
      case SlotKind::kNone:
        if (*len != 0) Malformed("NONE slot with payload");
        break;
      case SlotKind::kValue:
        if (*len != 8) Malformed("VALUE slot must carry 8 bytes");
        s.a = *p.U32();
        s.b = *p.U32();
        break;
      case SlotKind::kMemref:
        s.bytes.assign(payload->begin(), payload->end());
        s.declared = *len;
        break;
      case SlotKind::kShmPath:
        if (*len == 0) Malformed("empty shared-memory path");
        s.path.assign(payload->begin(), payload->end());
        break;
      case SlotKind::kMemrefSized:
        if (*len < 4) Malformed("sized MEMREF slot without size");
        s.declared = *p.U32();
        s.bytes.assign(payload->begin() + 4, payload->end());
        break;
    }
  }
  if (r.remaining() != 0) Malformed("trailing bytes after frame");
  return req;
}

std::vector<uint8_t> EncodeResponse(const Response& resp) {
  ByteWriter w;
  w.U32(resp.status);
  w.U8(resp.origin);
  for (const auto& p : resp.payloads) {
    w.U32(static_cast<uint32_t>(p.size()));
    w.Bytes(p);
  }
  return w.Take();
}

Response DecodeResponse(std::span<const uint8_t> frame) {
  ByteReader r(frame);
  Response resp;
  auto status = r.U32();
  auto origin = r.U8();
  if (!origin) Malformed("truncated response");
  resp.status = *status;
  resp.origin = *origin;
  for (auto& p : resp.payloads) {
    auto len = r.U32();
    auto bytes = len ? r.Bytes(*len) : std::nullopt;
    if (!bytes) Malformed("truncated response payload");
    p.assign(bytes->begin(), bytes->end());
  }
  if (r.remaining() != 0) Malformed("trailing bytes after response");
  return resp;
}

std::vector<uint8_t> EncodePauseEvent(const std::string& api) {
  ByteWriter w;
  w.U32(kMagic);
  w.U8(kPauseEvent);
  w.U16(static_cast<uint16_t>(api.size()));
  w.Str(api);
  return w.Take();
}

Response ErrorResponse() {
  Response r;
  r.status = gp::kErrorBadFormat;
  r.origin = static_cast<uint8_t>(gp::Origin::kComms);
  return r;
}

GpParamSet ToParamSet(const Request& req) {
  GpParamSet ps;
  ps.param_types = req.param_types;
  for (int i = 0; i < 4; ++i) {
    const WireSlot& s = req.slots[i];
    switch (s.kind) {
      case SlotKind::kNone:
        break;
      case SlotKind::kValue:
        ps.params[i] = ParamSlot::Value(s.a, s.b);
        break;
      case SlotKind::kMemref:
        ps.params[i] = ParamSlot::Memref(s.bytes);
        break;
      case SlotKind::kMemrefSized:
        ps.params[i] = ParamSlot::Memref(s.bytes, s.declared);
        break;
      case SlotKind::kShmPath:
        ps.params[i] = ParamSlot::Shm(MapFileBacking(s.path));
        break;
    }
  }
  return ps;
}

Response FromResult(const InvocationResult& result) {
  Response r;
  r.status = result.return_code;
  r.origin = static_cast<uint8_t>(result.origin);
  for (int i = 0; i < 4; ++i) {
    const ParamSlot& p = result.out_params[i];
    if (p.kind == ParamSlot::Kind::kValue) {
      ByteWriter w;
      w.U32(p.a);
      w.U32(p.b);
      r.payloads[i] = w.Take();
    } else if (p.kind == ParamSlot::Kind::kMemref) {
      r.payloads[i] = p.bytes;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Socket plumbing

void WriteAll(int fd, std::span<const uint8_t> bytes) {
  size_t off = 0;
  while (off < bytes.size()) {
    ssize_t n = send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      throw Error(ErrorCode::kIoError,
                  fmt::format("send: {}", std::strerror(errno)));
    }
    off += static_cast<size_t>(n);
  }
}

bool FrameReader::ReadExact(uint8_t* out, size_t n) {
  size_t off = 0;
  while (off < n) {
    ssize_t got = recv(fd_, out + off, n - off, 0);
    if (got < 0 && errno == EINTR) continue;
    if (got <= 0) {
      if (off == 0) return false;
      Malformed("connection closed mid-frame");
    }
    off += static_cast<size_t>(got);
  }
  return true;
}

void FrameReader::Drain() {
  uint8_t buf[4096];
  for (;;) {
    pollfd p{fd_, POLLIN, 0};
    if (poll(&p, 1, 50) <= 0 || !(p.revents & POLLIN)) return;
    if (recv(fd_, buf, sizeof buf, MSG_DONTWAIT) <= 0) return;
  }
}

std::optional<Request> FrameReader::ReadRequest() {
  std::vector<uint8_t> frame(kHeaderSize);
  if (!ReadExact(frame.data(), 4)) return std::nullopt;
  auto fail = [&](const std::string& why) -> std::optional<Request> {
    Drain();
    Malformed(why);
  };
  if (LoadLe32(frame.data()) != kMagic) return fail("bad magic");
  if (!ReadExact(frame.data() + 4, kHeaderSize - 4)) return std::nullopt;
  for (int i = 0; i < 4; ++i) {
    uint8_t hdr[5];
    if (!ReadExact(hdr, 5)) return fail("truncated frame");
    uint32_t len = LoadLe32(hdr + 1);
    if (hdr[0] > 4) return fail(fmt::format("unknown slot kind {}", hdr[0]));
    if (len > kMaxPayload) return fail(fmt::format("payload of {} bytes", len));
    size_t at = frame.size();
    frame.insert(frame.end(), hdr, hdr + 5);
    frame.resize(at + 5 + len);
    if (len > 0 && !ReadExact(frame.data() + at + 5, len)) {
      return fail("truncated payload");
    }
  }
  try {
    return DecodeRequest(frame);
  } catch (const Error&) {
    Drain();
    throw;
  }
}

std::variant<Response, std::string> FrameReader::ReadReply() {
  uint8_t head[5];
  if (!ReadExact(head, 5)) {
    throw Error(ErrorCode::kIoError, "server closed the connection");
  }
  if (LoadLe32(head) == kMagic && head[4] == kPauseEvent) {
    uint8_t len[2];
    ReadExact(len, 2);
    std::string name(static_cast<size_t>(len[0] | (len[1] << 8)), '\0');
    if (!name.empty()) ReadExact(reinterpret_cast<uint8_t*>(name.data()), name.size());
    return name;
  }
  std::vector<uint8_t> frame(head, head + 5);
  for (int i = 0; i < 4; ++i) {
    uint8_t l[4];
    if (!ReadExact(l, 4)) throw Error(ErrorCode::kIoError, "truncated response");
    uint32_t n = LoadLe32(l);
    if (n > kMaxPayload) Malformed("oversized response payload");
    size_t at = frame.size();
    frame.insert(frame.end(), l, l + 4);
    frame.resize(at + 4 + n);
    if (n > 0 && !ReadExact(frame.data() + at + 4, n)) {
      throw Error(ErrorCode::kIoError, "truncated response");
    }
  }
  return DecodeResponse(frame);
}

// ---------------------------------------------------------------------------
// Server

namespace {

sockaddr_un UnixAddress(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof(addr.sun_path)) {
    throw Error(ErrorCode::kIoError, fmt::format("socket path too long: {}", path));
  }
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  return addr;
}

}  // namespace

Server::Server(TaManager& manager, ServerOptions options)
    : manager_(manager), options_(std::move(options)) {
  if (!options_.store_path.empty()) {
    std::ifstream in(options_.store_path, std::ios::binary);
    if (in) {
      std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
      manager_.tee().LoadStore(bytes);
    }
  }
  if (!options_.pause_api.empty()) {
    manager_.tee().set_observer([this](std::string_view api, HookPhase phase) {
      if (phase != HookPhase::kAfter || api != options_.pause_api) return;
      if (++pause_count_ != options_.pause_nth || active_fd_ < 0) return;
      WriteAll(active_fd_, EncodePauseEvent(std::string(api)));
      FrameReader reader(active_fd_);
      for (;;) {
        std::optional<Request> req;
        try {
          req = reader.ReadRequest();
        } catch (const Error&) {
          WriteAll(active_fd_, EncodeResponse(ErrorResponse()));
          continue;
        }
        if (!req || req->opcode == Opcode::kResume) return;
        WriteAll(active_fd_, EncodeResponse(ErrorResponse()));
      }
    });
  }
}

Server::~Server() {
  manager_.tee().set_observer({});
  if (listen_fd_ >= 0) {
    close(listen_fd_);
    unlink(socket_path_.c_str());
  }
}

void Server::Listen(const std::string& socket_path) {
  socket_path_ = socket_path;
  unlink(socket_path.c_str());
  listen_fd_ = socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) throw Error(ErrorCode::kIoError, "socket failed");
  sockaddr_un addr = UnixAddress(socket_path);
  if (bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      listen(listen_fd_, 4) != 0) {
    throw Error(ErrorCode::kIoError,
                fmt::format("bind {}: {}", socket_path, std::strerror(errno)));
  }
}

void Server::Stop() { stop_.store(true); }

void Server::Run(size_t max_clients) {
  size_t served = 0;
  while (!stop_.load()) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (poll(&p, 1, 100) <= 0) continue;
    int fd = accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    ServeClient(fd);
    close(fd);
    if (max_clients != 0 && ++served >= max_clients) break;
  }
}

void Server::Persist() {
  if (options_.store_path.empty()) return;
  auto bytes = manager_.tee().SerializeStore();
  std::ofstream out(options_.store_path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

Response Server::Handle(const Request& req, int client_fd) {
  active_fd_ = client_fd;
  pause_count_ = 0;
  Response bad;
  bad.status = gp::kErrorBadParameters;
  bad.origin = static_cast<uint8_t>(gp::Origin::kApi);
  try {
    switch (req.opcode) {
      case Opcode::kOpen: {
        SessionOpenResult r = manager_.OpenSession(ToParamSet(req));
        Response resp = FromResult(r.result);
        if (r.session) {
          ByteWriter w;
          w.U32(*r.session);
          resp.payloads[0] = w.Take();
        }
        return resp;
      }
      case Opcode::kInvoke:
        if (!manager_.HasSession(req.session)) return bad;
        return FromResult(
            manager_.InvokeCommand(req.session, req.cmd_id, ToParamSet(req)));
      case Opcode::kClose:
        if (!manager_.HasSession(req.session)) return bad;
        return FromResult(manager_.CloseSession(req.session));
      case Opcode::kResume: {
        Response r;
        r.status = gp::kErrorBadState;
        r.origin = static_cast<uint8_t>(gp::Origin::kComms);
        return r;
      }
    }
  } catch (const Error&) {
    return bad;
  }
  return bad;
}

void Server::ServeClient(int fd) {
  FrameReader reader(fd);
  std::set<uint32_t> opened;
  for (;;) {
    std::optional<Request> req;
    try {
      req = reader.ReadRequest();
    } catch (const Error&) {
      try {
        WriteAll(fd, EncodeResponse(ErrorResponse()));
      } catch (const Error&) {
        break;
      }
      continue;
    }
    if (!req) break;
    Response resp = Handle(*req, fd);
    if (req->opcode == Opcode::kOpen && resp.payloads[0].size() == 4) {
      opened.insert(LoadLe32(resp.payloads[0].data()));
    } else if (req->opcode == Opcode::kClose) {
      opened.erase(req->session);
    }
    Persist();
    try {
      WriteAll(fd, EncodeResponse(resp));
    } catch (const Error&) {
      break;
    }
  }
  active_fd_ = -1;
  for (uint32_t s : opened) {
    if (manager_.HasSession(s)) manager_.CloseSession(s);
  }
  Persist();
}

// ---------------------------------------------------------------------------
// Client

Client::Client(const std::string& socket_path) {
  fd_ = socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  sockaddr_un addr = UnixAddress(socket_path);
  if (fd_ < 0 ||
      connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    throw Error(ErrorCode::kIoError,
                fmt::format("connect {}: {}", socket_path, std::strerror(errno)));
  }
}

Client::~Client() {
  if (fd_ >= 0) close(fd_);
}

void Client::SendRaw(std::span<const uint8_t> bytes) { WriteAll(fd_, bytes); }

Response Client::ReadResponse() {
  FrameReader reader(fd_);
  auto reply = reader.ReadReply();
  if (auto* r = std::get_if<Response>(&reply)) return *r;
  throw Error(ErrorCode::kProtocolError, "unexpected pause event");
}

Response Client::Send(const Request& request, const PauseCallback& on_pause) {
  WriteAll(fd_, EncodeRequest(request));
  FrameReader reader(fd_);
  for (;;) {
    auto reply = reader.ReadReply();
    if (auto* r = std::get_if<Response>(&reply)) return *r;
    if (on_pause) on_pause(std::get<std::string>(reply));
    Request resume;
    resume.opcode = Opcode::kResume;
    WriteAll(fd_, EncodeRequest(resume));
  }
}

std::optional<uint32_t> Client::Open(const Request& request) {
  Request req = request;
  req.opcode = Opcode::kOpen;
  Response r = Send(req);
  if (r.status != gp::kSuccess || r.payloads[0].size() != 4) return std::nullopt;
  return LoadLe32(r.payloads[0].data());
}

Response Client::Invoke(uint32_t session, uint32_t cmd_id, uint16_t param_types,
                        std::array<WireSlot, 4> slots,
                        const PauseCallback& on_pause) {
  Request req;
  req.opcode = Opcode::kInvoke;
  req.session = session;
  req.cmd_id = cmd_id;
  req.param_types = param_types;
  req.slots = std::move(slots);
  return Send(req, on_pause);
}

Response Client::Close(uint32_t session) {
  Request req;
  req.opcode = Opcode::kClose;
  req.session = session;
  return Send(req);
}

}  // namespace taemu::proto
