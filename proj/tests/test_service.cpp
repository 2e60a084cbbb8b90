// ======================================================================== //
// Copyright 2026 The ExaBricks-CPU Authors                                 //
//                                                                          //
// Licensed under the Apache License, Version 2.0 (the "License");          //
// you may not use this file except in compliance with the License.         //
// You may obtain a copy of the License at                                  //
//                                                                          //
//     http://www.apache.org/licenses/LICENSE-2.0                           //
//                                                                          //
// Unless required by applicable law or agreed to in writing, software      //
// distributed under the License is distributed on an "AS IS" BASIS,        //
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. //
// See the License for the specific language governing permissions and      //
// limitations under the License.                                           //
// ======================================================================== //


#include "support.hpp"

#include "exa/service/server.hpp"

#include <gtest/gtest.h>

#include <future>
#include <thread>

using namespace exa;
using namespace exa::service;

namespace {

  std::shared_ptr<const SceneData> service_data()
  {
    static auto d = exa::testing::build_scene_data(exa::testing::small_models()[0].spec);
    return d;
  }

  TransferFunction transparent() { return TransferFunction(0.0, 1.0, TransferFunction::Ramp{}); }

  json visible_tf_json()
  {
    const auto [lo, hi] = service_data()->model.valueRange();
    json j = io::tf_to_json(TransferFunction::linear_ramp(lo, hi, 0.8f));
    j["type"] = "set_tf";
    return j;
  }

  std::shared_ptr<SessionState> make_state(const TransferFunction &tf)
  {
    MarchParams p;
    p.threads = 1;
    return std::make_shared<SessionState>(service_data(), tf, std::nullopt, p);
  }

  std::vector<OutMessage> send(SessionState &s, const json &msg) { return handle_message(s, msg.dump()); }

  json frame_header(SessionState &s, int w = 24, int h = 20)
  {
    const auto out = send(s, {{"type", "request_frame"}, {"width", w}, {"height", h}});
    EXPECT_EQ(out.size(), 2u);
    if (out.size() != 2) return json::parse(out.at(0).payload);
    EXPECT_FALSE(out[0].binary);
    EXPECT_TRUE(out[1].binary);
    const io::Image img = io::decode_png(out[1].payload);
    EXPECT_EQ(img.width, w);
    EXPECT_EQ(img.height, h);
    return json::parse(out[0].payload);
  }

  std::string error_code(const std::vector<OutMessage> &out)
  {
    if (out.size() != 1) return "";
    const json j = json::parse(out[0].payload);
    if (j["type"] != "error") return "";
    EXPECT_TRUE(j["message"].is_string());
    return j["code"].get<std::string>();
  }

} // namespace

TEST(Protocol, HelloReturnsInfo)
{
  auto s = make_state(transparent());
  const auto out = send(*s, {{"type", "hello"}});
  ASSERT_EQ(out.size(), 1u);
  const json info = json::parse(out[0].payload);
  EXPECT_EQ(info["type"], "info");
  EXPECT_EQ(info["fields"], json::array({"gaussian"}));
  EXPECT_EQ(info["bounds"]["lo"][0], service_data()->supportBounds.lo.x);
  EXPECT_EQ(info["stats"]["cells"], service_data()->model.cellCount);
  EXPECT_EQ(info["stats"]["regions"], service_data()->regions.size());
}

TEST(Protocol, Errors)
{
  auto s = make_state(transparent());
  EXPECT_EQ(error_code(handle_message(*s, "{nope")), "bad_json");
  EXPECT_EQ(error_code(handle_message(*s, "[1,2]")), "bad_request");
  EXPECT_EQ(error_code(send(*s, {{"kind", "hello"}})), "bad_request");
  EXPECT_EQ(error_code(send(*s, {{"type", "teleport"}})), "unsupported");
  EXPECT_EQ(error_code(send(*s, {{"type", "request_frame"}, {"width", 0}, {"height", 4}})), "bad_request");
  EXPECT_EQ(error_code(send(*s, {{"type", "request_frame"}, {"width", 2.5}, {"height", 4}})), "bad_request");
  EXPECT_EQ(error_code(send(*s, {{"type", "request_frame"}, {"width", "8"}, {"height", 4}})), "bad_request");
  EXPECT_EQ(error_code(send(*s, {{"type", "set_camera"}, {"pos", {0, 0, 0}}, {"look", {0, 0, 0}}})), "bad_request");
  EXPECT_EQ(error_code(send(*s, {{"type", "set_camera"}, {"pos", {0, 0}}, {"look", {0, 0, 1}}})), "bad_request");
  EXPECT_EQ(error_code(send(*s, {{"type", "set_params"}, {"gradientMode", "sobel"}})), "bad_request");
  EXPECT_EQ(error_code(send(*s, {{"type", "set_params"}, {"rateScale", -1}})), "bad_request");
  EXPECT_EQ(error_code(send(*s, {{"type", "set_iso"}})), "bad_request");
  EXPECT_EQ(error_code(send(*s, {{"type", "set_tf"}, {"domain", {0, 1}}})), "bad_request");
  EXPECT_FALSE(s->hasPendingEdits());
  // the session keeps working after errors
  EXPECT_EQ(frame_header(*s)["type"], "frame");
}

TEST(Protocol, FramesHaveIncreasingIdsAndStats)
{
  auto s = make_state(transparent());
  uint64_t last = 0;
  for (int n = 0; n < 4; ++n) {
    const json h = frame_header(*s, 8 + n, 6);
    EXPECT_EQ(h["type"], "frame");
    EXPECT_EQ(h["encoding"], "png");
    EXPECT_EQ(h["width"], 8 + n);
    for (const char *key : {"ms", "regions", "samples", "bvhRebuildMs"}) EXPECT_TRUE(h["stats"].contains(key)) << key;
    EXPECT_GT(h["id"].get<uint64_t>(), last);
    last = h["id"].get<uint64_t>();
  }
  EXPECT_EQ(s->framesServed(), 4u);
}

TEST(Protocol, TransparentTfTakesNoSamples)
{
  auto s = make_state(TransferFunction::constant(0, 1, {1, 1, 1, 1}));
  EXPECT_GT(frame_header(*s)["stats"]["samples"].get<uint64_t>(), 0u);
  json tf = io::tf_to_json(transparent());
  tf["type"] = "set_tf";
  EXPECT_TRUE(send(*s, tf).empty());
  const json h = frame_header(*s);
  EXPECT_EQ(h["stats"]["samples"], 0);
  EXPECT_GT(h["stats"]["bvhRebuildMs"].get<double>(), 0.0);
}

TEST(Protocol, IsoRebuildReportedOnce)
{
  auto s = make_state(transparent());
  frame_header(*s);
  const auto [lo, hi] = service_data()->model.valueRange();
  EXPECT_TRUE(send(*s, {{"type", "set_iso"}, {"value", 0.5 * (lo + hi)}}).empty());
  const uint64_t volumeVersion = s->scene()->volumeBvh->version();
  EXPECT_GT(frame_header(*s)["stats"]["bvhRebuildMs"].get<double>(), 0.0);
  EXPECT_EQ(frame_header(*s)["stats"]["bvhRebuildMs"], 0.0);
  EXPECT_EQ(s->scene()->volumeBvh->version(), volumeVersion);
  ASSERT_TRUE(s->scene()->iso.has_value());
  EXPECT_TRUE(send(*s, {{"type", "set_iso"}, {"value", nullptr}}).empty());
  frame_header(*s);
  EXPECT_FALSE(s->scene()->iso.has_value());
}

TEST(Protocol, CameraAndParamsDoNotRebuild)
{
  auto s = make_state(TransferFunction::constant(0, 1, {1, 1, 1, 0.2f}));
  frame_header(*s);
  const auto scene = s->scene();
  const uint64_t rebuilds = s->rebuildCount();
  const Box3 b = service_data()->supportBounds;
  EXPECT_TRUE(send(*s, {{"type", "set_camera"}, {"pos", {b.center().x, b.center().y, b.lo.z - 40}},
                        {"look", io::vec_to_json(b.center())}, {"up", {0, 1, 0}}, {"fov", 30}}).empty());
  const json a = frame_header(*s);
  EXPECT_EQ(a["stats"]["bvhRebuildMs"], 0.0);
  EXPECT_TRUE(send(*s, {{"type", "set_params"}, {"rateScale", 2.0}, {"gradientMode", "none"}}).empty());
  const json c = frame_header(*s);
  EXPECT_EQ(c["stats"]["bvhRebuildMs"], 0.0);
  EXPECT_GT(c["stats"]["samples"].get<uint64_t>(), a["stats"]["samples"].get<uint64_t>());
  EXPECT_EQ(s->scene(), scene);
  EXPECT_EQ(s->rebuildCount(), rebuilds);
  EXPECT_EQ(s->params().gradientMode, GradientMode::none);
}

TEST(Protocol, TfEditsCoalesceLatestWins)
{
  auto s = make_state(transparent());
  frame_header(*s);
  const uint64_t volumeBefore = s->scene()->volumeBvh->version();
  json first = io::tf_to_json(TransferFunction::constant(0, 1, {1, 0, 0, 0.5f}));
  first["type"] = "set_tf";
  const json second = visible_tf_json();
  send(*s, first);
  send(*s, second);
  frame_header(*s);
  EXPECT_EQ(s->rebuildCount(), 1u);
  EXPECT_EQ(s->scene()->tf, io::tf_from_json(second));
  EXPECT_NE(s->scene()->volumeBvh->version(), volumeBefore);
}

TEST(Protocol, FramesDuringSlowRebuildUseThePreviousSnapshot)
{
  auto s = make_state(transparent());
  frame_header(*s);
  std::promise<void> entered;
  std::atomic<bool> release{false};
  s->rebuildHook = [&] {
    entered.set_value();
    while (!release) std::this_thread::sleep_for(std::chrono::milliseconds(2));
  };
  send(*s, visible_tf_json());
  auto slow = std::async(std::launch::async, [&] { return frame_header(*s); });
  entered.get_future().wait();
  // rebuild in flight: this request must not wait for it
  const json during = frame_header(*s);
  EXPECT_EQ(during["stats"]["samples"], 0);
  EXPECT_EQ(during["stats"]["bvhRebuildMs"], 0.0);
  release = true;
  const json after = slow.get();
  EXPECT_GT(after["stats"]["samples"].get<uint64_t>(), 0u);
  EXPECT_GT(after["stats"]["bvhRebuildMs"].get<double>(), 0.0);
  EXPECT_GT(after["id"].get<uint64_t>(), 0u);
  EXPECT_NE(after["id"], during["id"]);
}

TEST(Protocol, RebuildFailureKeepsPreviousSnapshot)
{
  auto s = make_state(transparent());
  const auto before = s->scene();
  s->rebuildHook = [] { throw std::runtime_error("out of memory"); };
  send(*s, visible_tf_json());
  EXPECT_EQ(error_code(send(*s, {{"type", "request_frame"}, {"width", 8}, {"height", 8}})), "rebuild_failed");
  EXPECT_EQ(s->scene(), before);
  s->rebuildHook = nullptr;
  EXPECT_EQ(frame_header(*s)["stats"]["samples"], 0);
}

// ---------------------------------------------------------------------------
// network transport

namespace {

  struct RunningServer {
    std::shared_ptr<SessionState> state;
    std::unique_ptr<RenderServer> server;
    std::thread thread;

    explicit RunningServer(std::shared_ptr<SessionState> s, uint16_t port = 0) : state(std::move(s))
    {
      server = std::make_unique<RenderServer>(state, ServerOptions{"127.0.0.1", port, 2});
      thread = std::thread([this] { server->run(); });
    }
    ~RunningServer()
    {
      server->stop();
      thread.join();
    }
  };

  struct Client {
    net::io_context ioc;
    websocket::stream<tcp::socket> ws{ioc};

    explicit Client(uint16_t port)
    {
      tcp::resolver resolver(ioc);
      net::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
      ws.handshake("127.0.0.1", "/");
    }
    void sendText(const std::string &s)
    {
      ws.text(true);
      ws.write(net::buffer(s));
    }
    std::pair<bool, std::string> receive()
    {
      beast::flat_buffer buf;
      ws.read(buf);
      return {!ws.got_text(), beast::buffers_to_string(buf.data())};
    }
  };

  std::string http_get(uint16_t port, const std::string &target, http::status &status)
  {
    net::io_context ioc;
    beast::tcp_stream stream(ioc);
    tcp::resolver resolver(ioc);
    stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
    http::request<http::empty_body> req{http::verb::get, target, 11};
    req.set(http::field::host, "127.0.0.1");
    http::write(stream, req);
    beast::flat_buffer buf;
    http::response<http::string_body> res;
    http::read(stream, buf, res);
    status = res.result();
    return res.body();
  }

} // namespace

TEST(Server, ScriptedSessionOverWebSocket)
{
  RunningServer rs(make_state(TransferFunction::constant(0, 1, {1, 1, 1, 0.3f})));
  Client c(rs.server->port());
  c.sendText(R"({"type":"hello"})");
  auto [bin, text] = c.receive();
  EXPECT_FALSE(bin);
  EXPECT_EQ(json::parse(text)["type"], "info");

  c.sendText("{broken");
  std::tie(bin, text) = c.receive();
  EXPECT_EQ(json::parse(text)["code"], "bad_json");

  c.sendText(visible_tf_json().dump());
  const auto [lo, hi] = service_data()->model.valueRange();
  c.sendText(json{{"type", "set_iso"}, {"value", 0.5 * (lo + hi)}}.dump());
  uint64_t lastId = 0;
  for (int n = 0; n < 3; ++n) {
    c.sendText(R"({"type":"request_frame","width":32,"height":24})");
    std::tie(bin, text) = c.receive();
    ASSERT_FALSE(bin);
    const json h = json::parse(text);
    ASSERT_EQ(h["type"], "frame");
    EXPECT_GT(h["id"].get<uint64_t>(), lastId);
    lastId = h["id"].get<uint64_t>();
    if (n == 0) EXPECT_GT(h["stats"]["bvhRebuildMs"].get<double>(), 0.0);
    else EXPECT_EQ(h["stats"]["bvhRebuildMs"], 0.0);
    std::tie(bin, text) = c.receive();
    ASSERT_TRUE(bin);
    const io::Image img = io::decode_png(text);
    EXPECT_EQ(img.width, 32);
    EXPECT_EQ(img.height, 24);
  }
  json tf = io::tf_to_json(transparent());
  tf["type"] = "set_tf";
  c.sendText(tf.dump());
  c.sendText(R"({"type":"set_iso","value":null})");
  c.sendText(R"({"type":"request_frame","width":16,"height":16})");
  std::tie(bin, text) = c.receive();
  EXPECT_EQ(json::parse(text)["stats"]["samples"], 0);
  c.receive();
  c.ws.close(websocket::close_code::normal);
}

TEST(Server, HealthEndpoint)
{
  RunningServer rs(make_state(transparent()));
  http::status status;
  const json body = json::parse(http_get(rs.server->port(), "/health", status));
  EXPECT_EQ(status, http::status::ok);
  EXPECT_EQ(body["status"], "ok");
  EXPECT_EQ(body["service"], kServiceName);
  EXPECT_TRUE(body.contains("bounds"));
  http_get(rs.server->port(), "/elsewhere", status);
  EXPECT_EQ(status, http::status::not_found);
}

TEST(Server, RefusesBusyPort)
{
  RunningServer rs(make_state(transparent()));
  EXPECT_THROW(RenderServer(rs.state, ServerOptions{"127.0.0.1", rs.server->port(), 1}), PortInUseError);
}

TEST(Server, StopClosesOpenSessions)
{
  auto state = make_state(transparent());
  auto server = std::make_unique<RenderServer>(state, ServerOptions{"127.0.0.1", 0, 1});
  std::thread t([&] { server->run(); });
  Client c(server->port());
  c.sendText(R"({"type":"hello"})");
  c.receive();
  server->stop();
  beast::flat_buffer buf;
  beast::error_code ec;
  c.ws.read(buf, ec);
  EXPECT_EQ(ec, websocket::error::closed);
  EXPECT_EQ(c.ws.reason().code, websocket::close_code::going_away);
  t.join();
}
