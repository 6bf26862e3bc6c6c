"""Price radio traffic on a Mica2-class node."""

from wban.energy import MICA2_TABLE, EnergyLedger, op_energy, savings_report

# Energy per operation is current x time x 3 V.
for name, op in MICA2_TABLE.items():
    print(f"{name:<24} {op_energy(op) * 1e6:12.2f} uJ")

# 25,000 four-byte readings sent raw, against sending 32.1% of them
# after running the filter's ~1.85 million instructions.
report = savings_report(25_000, round(0.321 * 25_000), 1_850_081)
print(f"\nbaseline   {report.baseline_J:.4f} J")
print(f"filtered   {report.total_J:.4f} J "
      f"(radio {report.transmission_J:.4f} J + cpu {report.computation_J:.4f} J)")
print(f"saving     {100 * report.saving_fraction:.2f}%")

# Periodic ACK bytes from the gateway are charged at the same per-byte rate.
acked = savings_report(25_000, 8025, 1_850_081, ack_bytes=25_000 // 60)
print(f"with ACKs  {acked.total_J:.4f} J, saving {100 * acked.saving_fraction:.2f}%")

# Ledgers add up across sensors.
total = EnergyLedger(transmitted_points=100) + EnergyLedger(transmitted_points=250)
print(f"\ntwo sensors: {total.transmitted_points} points, {total.total_energy() * 1e3:.3f} mJ")
