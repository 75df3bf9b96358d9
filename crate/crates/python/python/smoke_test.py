"""Quick end-to-end check of the Python bindings."""

import math
import os
import tempfile

import skyharvest_py as sh


def main():
    env = sh.Environment(seed=3, layout_seed=1)
    obs = env.observe()
    assert len(obs) == env.obs_dim

    steps, total = 0, 0.0
    while not env.done:
        obs, reward, done, info = env.step(env.greedy_action())
        total += reward
        steps += 1
    assert steps == 50 and done
    for generated, collected, pending in env.sensor_bits:
        assert generated == collected + pending
    print(f"greedy episode: {steps} slots, return {total:.4f}, energy {env.cum_energy:.1f} J")

    agent = sh.Agent(env.obs_dim, hidden=16, seed=7)
    action, log_prob = agent.act(env.reset(seed=4), deterministic=False)
    assert len(action) == 3 and all(-1.0 <= a <= 1.0 for a in action)
    assert math.isfinite(log_prob)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "agent.ckpt")
        agent.save(path)
        again = sh.Agent.load(path, env.obs_dim, hidden=16)
        assert again.act(obs)[0] == agent.act(obs)[0]

    buf = sh.ReplayBuffer(16, seed=1)
    for i in range(8):
        buf.push([float(i)], [0.0, 0.0, 0.0], 0.0, [0.0], False)
    buf.update_priorities([0, 1], [10.0, 0.0])
    idx, weights = buf.sample(4, 0.4)
    assert len(idx) == 4 and max(weights) == 1.0
    assert abs(sum(buf.probability(i) for i in range(len(buf))) - 1.0) < 1e-12

    assert abs(sh.jain_index([1.0, 1.0, 1.0]) - 1.0) < 1e-15
    assert len(sh.pfam([1.0, 2.0, 3.0])) == 3

    metrics = sh.train(seed=1, episodes=2)
    assert [m["episode"] for m in metrics] == [0, 1]
    print("smoke test passed")


if __name__ == "__main__":
    main()
