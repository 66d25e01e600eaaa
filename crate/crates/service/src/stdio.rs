//! Line transport: one JSON request per input line, one JSON response per
//! output line. Requests are handled concurrently, so responses may come
//! back out of order; clients match them by id.

use tokio::io::{AsyncBufRead, AsyncBufReadExt, AsyncWrite, AsyncWriteExt};
use tokio::sync::mpsc;

use crate::service::Service;

/// Serves until `input` ends and every pending response is written.
pub async fn serve_lines<R, W>(service: Service, input: R, mut output: W) -> std::io::Result<()>
where
    R: AsyncBufRead + Unpin,
    W: AsyncWrite + Unpin,
{
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let mut lines = input.lines();
    let reader = async {
        while let Some(line) = lines.next_line().await? {
            if line.trim().is_empty() {
                continue;
            }
            let (s, tx) = (service.clone(), tx.clone());
            tokio::spawn(async move {
                let resp = s.handle_text(&line).await;
                let _ = tx.send(serde_json::to_string(&resp).expect("response serializes"));
            });
        }
        drop(tx);
        Ok::<_, std::io::Error>(())
    };
    let writer = async {
        while let Some(mut line) = rx.recv().await {
            line.push('\n');
            output.write_all(line.as_bytes()).await?;
            output.flush().await?;
        }
        Ok::<_, std::io::Error>(())
    };
    let (r, w) = tokio::join!(reader, writer);
    r.and(w)
}
