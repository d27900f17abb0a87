package demo;

import java.io.IOException;
import java.io.Writer;
import java.util.Iterator;
import java.util.List;

public class NamePrinter {
    void printAll(List<String> names, Writer out) throws IOException {
        Iterator<String> it = names.iterator();
        if (it.hasNext()) {
            out.write(it.next());
        }
    }
}
