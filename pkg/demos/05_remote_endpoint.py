"""Delegating decisions to a chat-completion endpoint, with the fallback path.

Starts a tiny local stub that speaks the chat-completions protocol, points
the remote adapter at it, and shows (a) a normal round trip, (b) a reply
the lexicon cannot decode, and (c) the local-policy fallback inside a real
episode. Swap the base_url for a real deployment and set EC_DRIVE_API_KEY
to talk to an actual model; the request shape stays identical.

Run:  python3 demos/05_remote_endpoint.py
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ecdrive import (
    DriftInjection,
    EndpointConfig,
    NoDecisionFound,
    OffloadConfig,
    ScenarioConfig,
    Scene,
    VehicleState,
    remote_decide,
    run_episode,
)


class StubModel(BaseHTTPRequestHandler):
    reply = ("Perception: a slower vehicle sits ahead in the same lane.\n"
             "Prediction: the gap keeps shrinking at the current speeds.\n"
             "Planning: overtaking is clear on the left.\n"
             "Decision: change lane to the left.")

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        print(f"  [stub] got request for model={body['model']!r}, "
              f"{len(body['messages'])} messages, temperature={body['temperature']}")
        payload = json.dumps(
            {"choices": [{"message": {"role": "assistant", "content": type(self).reply}}]}
        ).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


server = ThreadingHTTPServer(("127.0.0.1", 0), StubModel)
threading.Thread(target=server.serve_forever, daemon=True).start()
base_url = f"http://127.0.0.1:{server.server_address[1]}"
endpoint = EndpointConfig(base_url=base_url, model="stub-model", timeout_s=5.0, role="Cloud")

scene = Scene(
    time=0.0, lane_count=3,
    ego=VehicleState(id=0, lane=0, position=0.0, speed=25.0),
    others=(VehicleState(id=12, lane=0, position=30.0, speed=15.0),),
)

print("=== Round trip ===")
decision = remote_decide(scene, endpoint)
print(f"decoded action: {decision.action.value} (source {decision.source})")
for line in decision.rationale:
    print(f"  model said: {line}")

print("\n=== Undecodable reply ===")
StubModel.reply = "I would rather talk about the scenery."
try:
    remote_decide(scene, endpoint)
except NoDecisionFound as exc:
    print(f"raised NoDecisionFound as expected: {exc}")

print("\n=== Fallback inside an episode ===")
StubModel.reply = "still nothing actionable here"
scenario = ScenarioConfig(name="corridor", lane_count=1, ego_lane=0,
                          ego_speed=10.0, v_max=10.0)
blockage = (DriftInjection(kind="NewObstacle", start_step=0, end_step=40,
                           lane=0, position=150.0, extent_m=20.0),)
trace = run_episode(
    scenario, blockage,
    OffloadConfig(mode="Collaborative", tau=0.0, n_ref=40, window=10),
    seed=0, steps=40, endpoint=endpoint,
)
offloaded = [r for r in trace.records if r.offloaded]
print(f"offloaded steps: {len(offloaded)}; every cloud decision came from "
      f"{set(r.cloud_decision.source for r in offloaded)} (local fallback)")
print(f"collisions: {trace.summary.collision_count} "
      "(the local planner still stops the car)")

server.shutdown()
server.server_close()
