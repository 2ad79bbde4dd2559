use super::FormatError;
use crate::matrix::SpikeMatrix;

/// One spike: the source pixel and its onset in microseconds from image start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventRecord {
    pub address: u16,
    pub timestamp_us: u32,
}

impl EventRecord {
    fn sort_key(&self) -> (u32, u16) {
        (self.timestamp_us, self.address)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamHeader {
    pub image_index: u32,
    pub label: Option<u8>,
    pub pixels: u16,
    pub bins: u16,
    pub delta_t_us: u32,
}

impl StreamHeader {
    pub(crate) fn of(m: &SpikeMatrix) -> Result<Self, FormatError> {
        let narrow = |field, value: usize| {
            u16::try_from(value).map_err(|_| FormatError::FieldOverflow {
                field,
                value: value as u64,
            })
        };
        let header = Self {
            image_index: m.image_index(),
            label: m.label(),
            pixels: narrow("pixels", m.pixels())?,
            bins: narrow("bins", m.bins())?,
            delta_t_us: m.delta_t_us(),
        };
        header.window_us()?;
        Ok(header)
    }

    /// Window length `bins * delta_t` in microseconds; errors if the last
    /// bin's timestamp cannot be represented.
    pub(crate) fn window_us(&self) -> Result<u64, FormatError> {
        let window = u64::from(self.bins) * u64::from(self.delta_t_us);
        if window > u64::from(u32::MAX) + 1 {
            return Err(FormatError::FieldOverflow {
                field: "bins * delta_t_us",
                value: window,
            });
        }
        Ok(window)
    }
}

/// Address-event view of one image, records sorted by `(timestamp, address)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EventStream {
    pub header: StreamHeader,
    pub records: Vec<EventRecord>,
}

/// One record per true cell: `address = pixel`, `timestamp = bin * delta_t`.
pub fn matrix_to_events(m: &SpikeMatrix) -> Result<EventStream, FormatError> {
    let header = StreamHeader::of(m)?;
    let dt = m.delta_t_us();
    let mut records: Vec<EventRecord> = m
        .spikes()
        .map(|(pixel, bin)| EventRecord {
            address: pixel as u16,
            timestamp_us: bin as u32 * dt,
        })
        .collect();
    records.sort_unstable_by_key(EventRecord::sort_key);
    Ok(EventStream { header, records })
}

/// Rebuilds the matrix from a stream, rejecting anything
/// [`matrix_to_events`] could not have produced.
pub fn events_to_matrix(s: &EventStream) -> Result<SpikeMatrix, FormatError> {
    let h = &s.header;
    h.window_us()?;
    if h.delta_t_us == 0 && h.bins > 0 {
        return Err(FormatError::Corrupt("delta_t_us is zero".into()));
    }
    let mut m = SpikeMatrix::new(
        usize::from(h.pixels),
        usize::from(h.bins),
        h.delta_t_us,
        h.image_index,
        h.label,
    );
    for (index, r) in s.records.iter().enumerate() {
        if index > 0 && s.records[index - 1].sort_key() >= r.sort_key() {
            return Err(FormatError::UnsortedStream(index));
        }
        let bin = u64::from(r.timestamp_us) / u64::from(h.delta_t_us.max(1));
        if r.address >= h.pixels || bin >= u64::from(h.bins) {
            return Err(FormatError::RecordOutOfBounds {
                index,
                address: r.address,
                timestamp_us: r.timestamp_us,
                pixels: h.pixels,
                bins: h.bins,
            });
        }
        if r.timestamp_us % h.delta_t_us != 0 {
            return Err(FormatError::MisalignedTimestamp {
                index,
                timestamp_us: r.timestamp_us,
                delta_t_us: h.delta_t_us,
            });
        }
        m.set(usize::from(r.address), bin as usize, true);
    }
    Ok(m)
}
