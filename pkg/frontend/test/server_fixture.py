"""Live server for the frontend integration test.

Runs the real WebSocket game server with a fast clock (short countdown,
short answer window) and a synthetic capture pipeline whose first frame has
no detectable face, so the client's no-face notice path is exercised.
Usage: python3 server_fixture.py PORT
"""

import sys

import uvicorn

from gazeboard.config import load_app_config
from gazeboard.engine import GameConfig
from gazeboard.server import GameServer, make_app
from gazeboard.simulate import RecordingPipelineFactory


def main(port: int) -> None:
    cfg = load_app_config()
    game = GameConfig(capture_countdown_s=0.2, answer_time_limit_s=30.0,
                      clue_reveal_remaining_s=5.0)
    factory = RecordingPipelineFactory(
        board=cfg.board, pose=cfg.camera.pose, intrinsics=cfg.camera.intrinsics,
        base_seed=11, absent_frames={0})
    server = GameServer(config=game, board=cfg.board,
                        dictionary_entries=cfg.dictionary_entries,
                        pipeline_factory=factory)
    uvicorn.run(make_app(server, tick_interval_s=0.05),
                host="127.0.0.1", port=port, log_level="warning")


if __name__ == "__main__":
    main(int(sys.argv[1]))
