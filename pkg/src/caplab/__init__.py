"""caplab: a remote-capture experimentation stack.

Simulated teleoperated capture devices stream synthetic video frames over a
custom binary wire format to a relay that fans them out to live viewers and
records them into per-session container directories.  A gateway process owns
scene leases, session lifecycle, and an append-only per-session event log;
after a session stops, a packer freezes the container (manifest, segment
files, subtitle sidecar) so the run can be replayed and verified bit for bit.
"""

__version__ = "0.1.0"
