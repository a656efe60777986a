"""A tour of the synthetic benchmark.

Real club bookkeeping data is private, so the engine ships a generator that
mimics it: clubs of very different sizes, members grouped into families,
titles that carry a member code only part of the time, declined names,
typos, and guardians or grandparents paying for children.

Run:  python3 demos/01_synthetic_data.py
"""

from collections import Counter

from remitmatch.synthgen import GenConfig, club_volumes, expected_id_rate, generate

config = GenConfig(n_clubs=4, n_transfers=2000, transfers_per_club_cap=400, members_per_club=(40, 120), seed=1)
dataset, report = generate(config)

counts, kept = club_volumes(config)
print("transfers per club before / after balancing:", counts.tolist(), "/", kept.tolist())
print(f"share of titles with a member code: configured {config.id_rate:.2f} before balancing, "
      f"{expected_id_rate(config):.3f} expected after (small clubs use codes less often)")
print()

print("A few transfers and who they pay for:")
members = {m.member_id: m for m in dataset.members}
gold = dataset.gold_by_transfer()
for t in dataset.transfers[:8]:
    paid_for = ", ".join(f"{members[m].first_name} {members[m].surname} ({members[m].member_code})"
                         for m in gold[t.transfer_id])
    print(f"  {t.transfer_id}  sender={t.sender_name!r:28}  title={t.title!r}")
    print(f"  {'':9}  -> {paid_for}")
print()

print("Members per transfer:", dict(sorted(Counter(len(v) for v in gold.values()).items())))
print()
print("Realized statistics, recomputed from the data alone:")
print(report.to_csv())
