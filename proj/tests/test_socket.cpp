// Copyright 2026 The fedsub Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "fedsub/fedsub.hpp"
#include "fedsub/socket.hpp"

namespace fedsub {
namespace {

TEST(Endpoints, Parse) {
  const auto eps = parse_endpoints("127.0.0.1:7001,localhost:7002");
  ASSERT_EQ(eps.size(), 2u);
  EXPECT_EQ(eps[0].host, "127.0.0.1");
  EXPECT_EQ(eps[0].port, 7001);
  EXPECT_EQ(eps[1].host, "localhost");
  EXPECT_THROW(parse_endpoints(""), ConfigError);
  EXPECT_THROW(parse_endpoints("host"), ConfigError);
  EXPECT_THROW(parse_endpoints("host:0"), ConfigError);
  EXPECT_THROW(parse_endpoints("host:99999"), ConfigError);
  EXPECT_THROW(parse_endpoints("a:1,"), ConfigError);
}

// N databases, each behind its own listening socket.
struct Cluster {
  std::vector<std::unique_ptr<DatabaseServer>> dbs;
  std::vector<std::unique_ptr<SocketServer>> servers;
  std::vector<Endpoint> endpoints;

  Cluster(const ProtocolConfig& cfg, std::uint64_t seed, Scheme scheme) {
    for (auto& d : DatabaseServer::create_all(cfg, initial_params(cfg, seed), scheme)) {
      dbs.push_back(std::make_unique<DatabaseServer>(d));
      servers.push_back(std::make_unique<SocketServer>(*dbs.back(), 0));
      servers.back()->start();
      endpoints.push_back({"127.0.0.1", servers.back()->port()});
    }
  }
};

TEST(SocketCarrier, MatchesSimulatedCarrierByteForByte) {
  for (auto scheme : {Scheme::kProposed, Scheme::kNaive}) {
    const auto cfg = ProtocolConfig::make(2, 2, 4, 65537);
    SimulationOptions opt;
    opt.seed = 11;
    opt.scheme = scheme;
    Simulation sim(cfg, opt);
    sim.run(3);

    Cluster cluster(cfg, 11, scheme);
    SocketCarrier carrier(cluster.endpoints);
    Simulation remote(cfg, opt, carrier);
    remote.run(3);

    EXPECT_EQ(remote.transcript(), sim.transcript());
    EXPECT_EQ(remote.ledger(), sim.ledger());
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(cluster.dbs[i]->state(), sim.databases()[i].state());
  }
}

TEST(SocketServer, SecondSessionGetsBusyFrame) {
  const auto cfg = ProtocolConfig::make(2, 2, 4, 65537);
  auto dbs = DatabaseServer::create_all(cfg, initial_params(cfg, 1), Scheme::kProposed);
  SocketServer server(dbs[0], 0);
  server.start();
  const Endpoint ep{"127.0.0.1", server.port()};

  Socket first = connect_to(ep, 5);
  first.write_frame({MessageKind::kGetShare, {}});
  ASSERT_EQ(first.read_frame()->kind, MessageKind::kShareResp);

  Socket second = connect_to(ep, 5);
  const auto busy = second.read_frame();
  ASSERT_TRUE(busy.has_value());
  EXPECT_EQ(busy->kind, MessageKind::kError);
  EXPECT_EQ(busy->text().rfind("busy", 0), 0u);

  // The first session is unaffected and the server frees up afterwards.
  first.write_frame({MessageKind::kGetShare, {}});
  EXPECT_EQ(first.read_frame()->kind, MessageKind::kShareResp);
  first.reset();
  for (int k = 0; k < 100 && server.sessions_completed() == 0; ++k) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  Socket third = connect_to(ep, 5);
  third.write_frame({MessageKind::kGetShare, {}});
  EXPECT_EQ(third.read_frame()->kind, MessageKind::kShareResp);
}

TEST(SocketServer, ErrorFrameForBadRequest) {
  const auto cfg = ProtocolConfig::make(2, 2, 4, 65537);
  auto dbs = DatabaseServer::create_all(cfg, initial_params(cfg, 1), Scheme::kProposed);
  SocketServer server(dbs[0], 0);
  server.start();
  Socket s = connect_to({"127.0.0.1", server.port()}, 5);
  s.write_frame({MessageKind::kUploadCombos, {}});
  const auto resp = s.read_frame();
  ASSERT_TRUE(resp.has_value());
  EXPECT_EQ(resp->kind, MessageKind::kError);
}

TEST(SocketServer, StopsAfterSessionLimit) {
  const auto cfg = ProtocolConfig::make(2, 2, 4, 65537);
  auto dbs = DatabaseServer::create_all(cfg, initial_params(cfg, 1), Scheme::kProposed);
  SocketServer server(dbs[0], 0);
  server.start(1);
  {
    Socket s = connect_to({"127.0.0.1", server.port()}, 5);
    s.write_frame({MessageKind::kGetShare, {}});
    EXPECT_TRUE(s.read_frame().has_value());
  }
  server.wait();
  EXPECT_EQ(server.sessions_completed(), 1u);
}

TEST(SocketCarrier, UnreachableEndpointIsTransportError) {
  // Bind then close to get a port nobody listens on.
  std::uint16_t port = 0;
  {
    const auto cfg = ProtocolConfig::make(2, 2, 4, 65537);
    auto dbs = DatabaseServer::create_all(cfg, initial_params(cfg, 1), Scheme::kProposed);
    SocketServer probe(dbs[0], 0);
    port = probe.port();
  }
  SocketCarrier carrier({{"127.0.0.1", port}, {"127.0.0.1", port}}, 2);
  Simulation remote(ProtocolConfig::make(2, 2, 4, 65537), {}, carrier);
  EXPECT_THROW(remote.step(0), TransportError);
}

TEST(SocketCarrier, ServerGoingAwayMidRunIsTransportError) {
  const auto cfg = ProtocolConfig::make(2, 2, 4, 65537);
  Cluster cluster(cfg, 1, Scheme::kProposed);
  SocketCarrier carrier(cluster.endpoints, 2);
  Simulation remote(cfg, {}, carrier);
  remote.step(0);
  cluster.servers[1]->stop();
  cluster.servers[1].reset();
  EXPECT_THROW(remote.step(1), TransportError);
}

}  // namespace
}  // namespace fedsub
