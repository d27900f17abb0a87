package inventory.export;

import java.io.IOException;
import java.io.Writer;
import java.util.Iterator;
import java.util.List;

public class CouponExport {
    public void export(Writer out, List<String> rows) throws IOException {
        Iterator<String> it = rows.iterator();
        while (it.hasNext()) {
            out.write(it.next());
        }
        out.flush();
        out.close();
    }
}
