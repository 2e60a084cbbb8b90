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


#pragma once

#include "exa/service/session.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <set>

namespace exa::service {

  namespace beast = boost::beast;
  namespace http = beast::http;
  namespace websocket = beast::websocket;
  namespace net = boost::asio;
  using tcp = net::ip::tcp;

  struct ServerOptions {
    std::string host = "127.0.0.1";
    uint16_t port = 9876; // 0 picks a free port
    int threads = 4;
  };

  struct PortInUseError : std::runtime_error {
    using std::runtime_error::runtime_error;
  };

  namespace detail {

    class WsSession : public std::enable_shared_from_this<WsSession> {
    public:
      WsSession(tcp::socket &&socket, std::shared_ptr<SessionState> state)
        : ws_(std::move(socket)), state_(std::move(state)) {}

      void start(http::request<http::string_body> req)
      {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.read_message_max(16 * 1024 * 1024);
        ws_.async_accept(req, beast::bind_front_handler(&WsSession::onAccept, shared_from_this()));
      }

      void close()
      {
        net::post(ws_.get_executor(), [self = shared_from_this()] {
          if (!self->ws_.is_open() || self->closing_) return;
          self->closing_ = true;
          self->ws_.async_close(websocket::close_code::going_away, [self](beast::error_code) {});
        });
      }

    private:
      void onAccept(beast::error_code ec)
      {
        if (!ec) read();
      }

      void read()
      {
        ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::onRead, shared_from_this()));
      }

      void onRead(beast::error_code ec, size_t)
      {
        if (ec) return;
        std::vector<OutMessage> out;
        if (ws_.got_text()) out = handle_message(*state_, beast::buffers_to_string(buffer_.data()));
        else out.push_back(error_message("bad_request", "expected a text message"));
        buffer_.consume(buffer_.size());
        for (const OutMessage &m : out) {
          ws_.text(!m.binary);
          ws_.write(net::buffer(m.payload), ec);
          if (ec) return;
        }
        read();
      }

      websocket::stream<beast::tcp_stream> ws_;
      std::shared_ptr<SessionState> state_;
      beast::flat_buffer buffer_;
      bool closing_ = false;
    };

    class HttpSession : public std::enable_shared_from_this<HttpSession> {
    public:
      using Register = std::function<void(const std::shared_ptr<WsSession> &)>;

      HttpSession(tcp::socket &&socket, std::shared_ptr<SessionState> state, Register reg)
        : stream_(std::move(socket)), state_(std::move(state)), register_(std::move(reg)) {}

      void start()
      {
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpSession::onRead, shared_from_this()));
      }

    private:
      void onRead(beast::error_code ec, size_t)
      {
        if (ec) return;
        if (websocket::is_upgrade(req_)) {
          stream_.expires_never();
          auto ws = std::make_shared<WsSession>(stream_.release_socket(), state_);
          register_(ws);
          ws->start(std::move(req_));
          return;
        }
        auto res = std::make_shared<http::response<http::string_body>>();
        res->version(req_.version());
        res->keep_alive(false);
        res->set(http::field::server, kServiceName);
        if (req_.method() == http::verb::get && req_.target() == "/health") {
          json body = state_->describe();
          body["status"] = "ok";
          body["framesServed"] = state_->framesServed();
          res->result(http::status::ok);
          res->set(http::field::content_type, "application/json");
          res->body() = body.dump();
        } else {
          res->result(http::status::not_found);
          res->set(http::field::content_type, "text/plain");
          res->body() = "not found\n";
        }
        res->prepare_payload();
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, size_t) {
          beast::error_code ignored;
          self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        });
      }

      beast::tcp_stream stream_;
      beast::flat_buffer buffer_;
      http::request<http::string_body> req_;
      std::shared_ptr<SessionState> state_;
      Register register_;
    };

  } // ::exa::service::detail

  /// WebSocket frame-streaming endpoint plus `GET /health` on one port.
  class RenderServer {
  public:
    /// Binds immediately; throws PortInUseError if the port is taken.
    RenderServer(std::shared_ptr<SessionState> state, ServerOptions options = {})
      : state_(std::move(state)), options_(std::move(options)), ioc_(std::max(1, options_.threads)),
        acceptor_(ioc_), shutdownTimer_(ioc_)
    {
      const tcp::endpoint endpoint(net::ip::make_address(options_.host), options_.port);
      beast::error_code ec;
      acceptor_.open(endpoint.protocol(), ec);
      if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
      if (!ec) acceptor_.bind(endpoint, ec);
      if (ec == net::error::address_in_use)
        throw PortInUseError("port " + std::to_string(options_.port) + " is already in use");
      if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
      if (ec) throw std::runtime_error("cannot listen on " + options_.host + ":" + std::to_string(options_.port)
                                       + ": " + ec.message());
      port_ = acceptor_.local_endpoint().port();
    }

    uint16_t port() const { return port_; }

    /// Serves until stop() is called; uses options.threads threads.
    void run()
    {
      accept();
      std::vector<std::thread> pool;
      for (int t = 1; t < options_.threads; ++t) pool.emplace_back([this] { ioc_.run(); });
      ioc_.run();
      for (auto &th : pool) th.join();
    }

    /// Stops accepting, closes open sessions and lets run() return. Safe
    /// to call from any thread or a signal handler's asio completion.
    void stop()
    {
      net::post(ioc_, [this] {
        beast::error_code ignored;
        acceptor_.close(ignored);
        std::lock_guard lock(sessionsMutex_);
        for (auto &weak : sessions_)
          if (auto s = weak.lock()) s->close();
        sessions_.clear();
        stopping_ = true;
      });
      // sessions get a moment to say goodbye, then the loop is torn down
      net::post(ioc_, [this] {
        shutdownTimer_.expires_after(std::chrono::milliseconds(250));
        shutdownTimer_.async_wait([this](beast::error_code) { ioc_.stop(); });
      });
    }

    net::io_context &context() { return ioc_; }

  private:
    void accept()
    {
      acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
        if (ec) return;
        std::make_shared<detail::HttpSession>(std::move(socket), state_, [this](const std::shared_ptr<detail::WsSession> &s) {
          std::lock_guard lock(sessionsMutex_);
          if (stopping_) {
            s->close();
            return;
          }
          std::erase_if(sessions_, [](const auto &w) { return w.expired(); });
          sessions_.push_back(s);
        })->start();
        accept();
      });
    }

    std::shared_ptr<SessionState> state_;
    ServerOptions options_;
    net::io_context ioc_;
    tcp::acceptor acceptor_;
    net::steady_timer shutdownTimer_;
    uint16_t port_ = 0;
    std::mutex sessionsMutex_;
    std::vector<std::weak_ptr<detail::WsSession>> sessions_;
    bool stopping_ = false;
  };

} // ::exa::service
